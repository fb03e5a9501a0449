"""Core ranking types, the pairwise-count matrix, and ranking quality metrics.

A *ranking* is a permutation of proposal indices ``0..n_p-1``, best first.
Reviewers submit *partial rankings*: an ordered list of the proposals they
were assigned, possibly containing tie groups.  Partial rankings aggregate
into the RCM matrix, whose entry ``(i, j)`` counts the reviewers that placed
proposal ``i`` strictly above proposal ``j``.
"""

from __future__ import annotations

from collections.abc import Iterable, Iterator, Sequence
from dataclasses import dataclass

import numpy as np


class UndefinedMetricError(ValueError):
    """Raised when a metric has an empty denominator (no pairs to compare)."""


@dataclass(frozen=True)
class PartialRanking:
    """One reviewer's ordered list of assigned proposals, best first.

    Attributes:
        reviewer: Index of the reviewer who produced the list.
        groups: Tie groups in preference order.  Each group is a tuple of
            proposal indices; a singleton group is an untied position.
    """

    reviewer: int
    groups: tuple[tuple[int, ...], ...]

    def __post_init__(self) -> None:
        seen: set[int] = set()
        for group in self.groups:
            if not group:
                raise ValueError("empty tie group in partial ranking")
            for p in group:
                if p < 0:
                    raise ValueError(f"negative proposal id {p}")
                if p in seen:
                    raise ValueError(f"proposal {p} appears twice in partial ranking")
                seen.add(p)

    @classmethod
    def from_order(cls, reviewer: int, order: Iterable[int]) -> "PartialRanking":
        """Build a tie-free partial ranking from a plain ordered list."""
        return cls(reviewer, tuple((int(p),) for p in order))

    @property
    def size(self) -> int:
        """Total number of proposals ranked."""
        return sum(len(g) for g in self.groups)

    def proposals(self) -> list[int]:
        """All ranked proposal ids, best group first."""
        return [p for group in self.groups for p in group]

    def ordered_pairs(self) -> Iterator[tuple[int, int]]:
        """Yield every (winner, loser) pair the reviewer expressed.

        Pairs within a tie group express no order and are not yielded.
        """
        for gi in range(len(self.groups)):
            for gj in range(gi + 1, len(self.groups)):
                for a in self.groups[gi]:
                    for b in self.groups[gj]:
                        yield a, b


@dataclass(frozen=True)
class MetricReport:
    """Quality metrics for one inferred global ranking.

    Attributes:
        fit_ci: Concordance of the ranking with the reviewer-given pairs.
        truth_ci: Concordance of the ranking with the true ranking.
        top_fraction_accuracy: Fraction of the true top slice recovered.
    """

    fit_ci: float
    truth_ci: float
    top_fraction_accuracy: float


def as_ranking(ranking: Sequence[int]) -> np.ndarray:
    """Validate that ``ranking`` is a permutation of ``0..n-1`` and return it."""
    r = np.asarray(ranking, dtype=np.int64)
    if r.ndim != 1:
        raise ValueError("ranking must be one-dimensional")
    n = r.shape[0]
    present = np.zeros(n, dtype=bool)
    if n and (r.min() < 0 or r.max() >= n):
        raise ValueError("ranking entries must lie in [0, n)")
    present[r] = True
    if not present.all():
        raise ValueError("ranking is not a permutation: some ids repeat or are missing")
    return r


def ranking_positions(ranking: Sequence[int]) -> np.ndarray:
    """Inverse permutation: position of each proposal in the ranking (0 = best)."""
    r = as_ranking(ranking)
    pos = np.empty_like(r)
    pos[r] = np.arange(r.shape[0])
    return pos


def build_rcm(partials: Iterable[PartialRanking], n_p: int) -> np.ndarray:
    """Aggregate partial rankings into the pairwise ranked-above count matrix.

    Entry ``(i, j)`` counts the reviewers that ranked both ``i`` and ``j``
    and placed ``i`` strictly above ``j``.  Tied pairs contribute to neither
    direction, so ``rcm[i, j] + rcm[j, i]`` equals the number of reviewers
    that compared the pair without tying it.

    Args:
        partials: Reviewer partial rankings.
        n_p: Total number of proposals (matrix dimension).

    Returns:
        An ``(n_p, n_p)`` integer matrix with a zero diagonal.
    """
    rcm = np.zeros((n_p, n_p), dtype=np.int64)
    for pr in partials:
        for p in (p for g in pr.groups for p in g):
            if p >= n_p:
                raise ValueError(f"proposal id {p} out of range for n_p={n_p}")
        for a, b in pr.ordered_pairs():
            rcm[a, b] += 1
    return rcm


def cost(ranking: Sequence[int], rcm: np.ndarray) -> int:
    """Number of ranking pairs that disagree with the RCM matrix.

    A pair placed as ``(i before j)`` disagrees when strictly more reviewers
    ranked ``j`` above ``i`` than the reverse; equal counts (including pairs
    never compared) count as agreement.
    """
    r = as_ranking(ranking)
    if r.shape[0] != rcm.shape[0]:
        raise ValueError("ranking length does not match rcm dimension")
    sub = rcm[np.ix_(r, r)]
    return int(np.triu(sub < sub.T, k=1).sum())


def fit_concordance(ranking: Sequence[int], partials: Iterable[PartialRanking]) -> float:
    """Fraction of reviewer-given pairs whose order the ranking reproduces.

    Every strictly ordered pair from every reviewer counts once (pairs
    compared by several reviewers count with multiplicity).  Tied reviewer
    pairs express no order and are excluded from both numerator and
    denominator.

    Raises:
        UndefinedMetricError: If the reviewers expressed no ordered pairs.
    """
    pos = ranking_positions(ranking)
    n = pos.shape[0]
    agree = 0
    total = 0
    for pr in partials:
        for a, b in pr.ordered_pairs():
            if a >= n or b >= n:
                raise ValueError(f"proposal id out of range for ranking of size {n}")
            total += 1
            if pos[a] < pos[b]:
                agree += 1
    if total == 0:
        raise UndefinedMetricError("no ordered reviewer pairs: concordance undefined")
    return agree / total


def truth_concordance(inferred: Sequence[int], truth: Sequence[int]) -> float:
    """Fraction of all proposal pairs ordered identically in both rankings.

    Equals ``(kendall_tau + 1) / 2`` for permutations; 1.0 iff the rankings
    are identical and 0.0 iff one reverses the other.
    """
    a = as_ranking(inferred)
    b = as_ranking(truth)
    if a.shape[0] != b.shape[0]:
        raise ValueError("rankings have different lengths")
    n = a.shape[0]
    if n < 2:
        raise UndefinedMetricError("concordance undefined for fewer than two proposals")
    pos_a = ranking_positions(a)
    pos_b = ranking_positions(b)
    da = pos_a[:, None] - pos_a[None, :]
    db = pos_b[:, None] - pos_b[None, :]
    concordant = int(np.triu(da * db > 0, k=1).sum())
    return concordant / (n * (n - 1) // 2)


def top_fraction_accuracy(
    inferred: Sequence[int], truth: Sequence[int], fraction: float = 0.2
) -> float:
    """Fraction of the true top slice recovered in the inferred top slice.

    The slice holds ``k = round(fraction * n_p)`` proposals (round half up,
    never below one).  Order within the slice is ignored.

    Args:
        inferred: Inferred global ranking, best first.
        truth: True global ranking, best first.
        fraction: Size of the top slice as a fraction of all proposals,
            in ``(0, 1]``.
    """
    if not 0.0 < fraction <= 1.0:
        raise ValueError(f"fraction must lie in (0, 1], got {fraction}")
    a = as_ranking(inferred)
    b = as_ranking(truth)
    if a.shape[0] != b.shape[0]:
        raise ValueError("rankings have different lengths")
    n = a.shape[0]
    k = max(1, int(np.floor(fraction * n + 0.5)))
    top_inferred = set(a[:k].tolist())
    top_truth = set(b[:k].tolist())
    return len(top_inferred & top_truth) / k
