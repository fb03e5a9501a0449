"""Text formats for rankings, partial rankings, constraints, and CSV output.

Partial rankings use one line per reviewer::

    reviewer_id: 3 7 (1 4) 9

where parentheses delimit a tie group and positions read best first.
Rankings are whitespace-separated proposal ids, best first.  Constraint
files use ``reviewer_id: forbidden ids...``.
"""

from __future__ import annotations

import re
from collections.abc import Iterable, Sequence
from pathlib import Path

import numpy as np

from .assignment import Assignment, Constraints
from .rankings import PartialRanking


def format_ranking(ranking: Sequence[int]) -> str:
    return " ".join(str(int(p)) for p in ranking)


def parse_ranking(text: str) -> np.ndarray:
    tokens = text.split()
    if not tokens:
        raise ValueError("empty ranking")
    return np.array([int(t) for t in tokens], dtype=np.int64)


def format_partial(pr: PartialRanking) -> str:
    parts = []
    for group in pr.groups:
        if len(group) == 1:
            parts.append(str(group[0]))
        else:
            parts.append("(" + " ".join(str(p) for p in group) + ")")
    return f"{pr.reviewer}: " + " ".join(parts)


def parse_partial(line: str) -> PartialRanking:
    head, sep, rest = line.partition(":")
    if not sep:
        raise ValueError(f"missing 'reviewer:' prefix in line {line!r}")
    reviewer = int(head.strip())
    tokens = re.sub(r"([()])", r" \1 ", rest).split()
    groups: list[tuple[int, ...]] = []
    tied: list[int] | None = None
    for token in tokens:
        if token == "(":
            if tied is not None:
                raise ValueError(f"nested tie group in line {line!r}")
            tied = []
        elif token == ")":
            if not tied:
                raise ValueError(f"empty or unopened tie group in line {line!r}")
            groups.append(tuple(tied))
            tied = None
        elif tied is not None:
            tied.append(int(token))
        else:
            groups.append((int(token),))
    if tied is not None:
        raise ValueError(f"unclosed tie group in line {line!r}")
    return PartialRanking(reviewer, tuple(groups))


def format_partials(partials: Iterable[PartialRanking]) -> str:
    return "\n".join(format_partial(pr) for pr in partials) + "\n"


def parse_partials(text: str) -> list[PartialRanking]:
    out = []
    for line in text.splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            out.append(parse_partial(line))
    return out


def parse_constraints(text: str, n: int) -> Constraints:
    """Constraint file: ``reviewer_id: forbidden ids...`` (self always added)."""
    extra: dict[int, list[int]] = {}
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        head, sep, rest = line.partition(":")
        if not sep:
            raise ValueError(f"missing 'reviewer:' prefix in line {line!r}")
        reviewer = int(head.strip())
        if not 0 <= reviewer < n:
            raise ValueError(f"reviewer {reviewer} out of range for n={n}")
        extra.setdefault(reviewer, []).extend(int(t) for t in rest.split())
    return Constraints.from_mapping(n, extra)


def format_assignment_csv(assignment: Assignment) -> str:
    lines = ["reviewer_id," + ",".join(f"proposal_{k}" for k in range(assignment.m))]
    for i, props in enumerate(assignment.reviews):
        lines.append(str(i) + "," + ",".join(str(p) for p in props))
    return "\n".join(lines) + "\n"


def format_value(x: object) -> str:
    """Deterministic CSV cell rendering; floats use 10 significant digits."""
    if isinstance(x, bool):
        return str(x).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".10g")
    return str(x)


def render_csv(header: Sequence[str], rows: Iterable[Sequence[object]]) -> str:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(format_value(x) for x in row))
    return "\n".join(lines) + "\n"


def write_text(path: Path | str, content: str) -> None:
    Path(path).write_text(content, encoding="utf-8")


def package_version() -> str:
    try:
        from importlib.metadata import version

        return version("dprsim")
    except Exception:
        return "0.1.0+local"


def render_meta(command: str, config: dict) -> str:
    """Reproducibility record: version stamp plus the resolved configuration."""
    lines = [f"dprsim-{package_version()}", f"command={command}"]
    for key in sorted(config):
        lines.append(f"{key}={format_value(config[key])}")
    return "\n".join(lines) + "\n"
