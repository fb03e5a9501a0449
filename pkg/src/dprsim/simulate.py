"""Generative model of a distributed review round.

True proposal merits are truncated-normal draws; each reviewer carries a
constant bias and a per-review error level.  A reviewer's observed score for
a proposal is ``truth + bias + error_level * z`` with ``z`` standard normal,
and only the resulting within-reviewer ranking is kept.

Randomness is split into independent streams per role (scores, profiles,
assignment, balancing, reviews, aggregation) derived from the master seed
and replicate index, so changing one parameter never perturbs draws it does
not govern.  In particular the bias spread scales an already-drawn normal
vector, which makes rankings bit-identical across bias settings.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from .assignment import Assignment
from .rankings import PartialRanking

# role indices for stream derivation
SCORES_STREAM = 0
PROFILES_STREAM = 1
ASSIGNMENT_STREAM = 2
BALANCE_STREAM = 3
REVIEWS_STREAM = 4
ALGORITHM_STREAM = 5

_SEED_MASK = 0xFFFFFFFFFFFFFFFF


@dataclass(frozen=True)
class SimParams:
    """Parameters of the generative model.

    Attributes:
        n_p: Number of proposals (one per applicant).
        n_r: Reviews per proposal, equal to proposals per reviewer.
        sd_s: Spread of the true scores around 50.
        br_sd: Spread of the per-reviewer bias around 0.
        er_df: Chi-squared degrees of freedom for per-reviewer error levels;
            also the mean error level.
        seed: Master seed for all derived streams.
    """

    n_p: int = 40
    n_r: int = 7
    sd_s: float = 20.0
    br_sd: float = 10.0
    er_df: float = 10.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_p < 2:
            raise ValueError(f"n_p must be at least 2, got {self.n_p}")
        if not 2 <= self.n_r < self.n_p:
            raise ValueError(f"need 2 <= n_r < n_p, got n_r={self.n_r}, n_p={self.n_p}")
        if self.sd_s < 0:
            raise ValueError(f"sd_s must be non-negative, got {self.sd_s}")
        if self.br_sd < 0:
            raise ValueError(f"br_sd must be non-negative, got {self.br_sd}")
        if self.er_df <= 0:
            raise ValueError(f"er_df must be positive, got {self.er_df}")


@dataclass(frozen=True)
class ReviewerProfile:
    """One reviewer's bias (constant shift) and error level (score noise sd)."""

    mu: float
    sigma: float


def stream(seed: int, replicate: int, role: int) -> np.random.Generator:
    """Independent generator for one role within one replicate."""
    ss = np.random.SeedSequence([seed & _SEED_MASK, replicate, role])
    return np.random.Generator(np.random.PCG64(ss))


def stream_seed(seed: int, replicate: int, role: int) -> int:
    """Derived integer seed for components that take a seed, not a generator."""
    ss = np.random.SeedSequence([seed & _SEED_MASK, replicate, role])
    return int(ss.generate_state(1, np.uint64)[0])


def sample_true_scores(
    n_p: int, sd_s: float, rng: np.random.Generator
) -> np.ndarray:
    """Draw true proposal scores: Normal(50, sd_s) truncated to [0, 100].

    Rejection sampling keeps the distribution exact; with ``sd_s = 0`` every
    score is exactly 50.
    """
    if sd_s < 0:
        raise ValueError(f"sd_s must be non-negative, got {sd_s}")
    if sd_s == 0:
        return np.full(n_p, 50.0)
    scores = np.empty(n_p, dtype=np.float64)
    need = np.ones(n_p, dtype=bool)
    while need.any():
        k = int(need.sum())
        draws = rng.normal(50.0, sd_s, size=k)
        ok = (draws >= 0.0) & (draws <= 100.0)
        idx = np.flatnonzero(need)[ok]
        scores[idx] = draws[ok]
        need[idx] = False
    return scores


def true_ranking(scores: Sequence[float]) -> np.ndarray:
    """Ranking by descending true score; exact ties break by ascending id."""
    s = np.asarray(scores, dtype=np.float64)
    return np.lexsort((np.arange(s.shape[0]), -s)).astype(np.int64)


def sample_reviewers(
    n_p: int, br_sd: float, er_df: float, rng: np.random.Generator
) -> list[ReviewerProfile]:
    """Draw reviewer profiles: bias ~ Normal(0, br_sd), error ~ ChiSq(er_df).

    The bias vector is a scaled standard-normal draw, so two runs on the
    same stream with different ``br_sd`` share the underlying draws and the
    error levels are untouched.
    """
    mu = br_sd * rng.standard_normal(n_p)
    sigma = rng.chisquare(er_df, n_p)
    return [ReviewerProfile(float(m), float(s)) for m, s in zip(mu, sigma)]


def simulate_reviews(
    truth: Sequence[float],
    profiles: Sequence[ReviewerProfile],
    assignment: Assignment | Sequence[Sequence[int]],
    rng: np.random.Generator,
) -> list[PartialRanking]:
    """Generate every reviewer's partial ranking of their assigned proposals.

    The reviewer scores each assigned proposal as ``truth + mu + sigma * z``
    and submits the descending-score order; scores are then discarded.  Ties
    (probability zero for continuous draws) break by an extra random key so
    the output never contains tie groups.  The bias term is constant within
    a reviewer and cannot reorder their list.
    """
    truth_arr = np.asarray(truth, dtype=np.float64)
    reviews = assignment.reviews if isinstance(assignment, Assignment) else assignment
    if len(reviews) != len(profiles):
        raise ValueError(
            f"{len(reviews)} review sets for {len(profiles)} reviewer profiles"
        )
    partials: list[PartialRanking] = []
    for reviewer, props in enumerate(reviews):
        items = np.asarray(sorted(props), dtype=np.int64)
        profile = profiles[reviewer]
        observed = (
            truth_arr[items]
            + profile.mu
            + profile.sigma * rng.standard_normal(items.shape[0])
        )
        tiebreak = rng.random(items.shape[0])
        order = np.lexsort((tiebreak, -observed))
        partials.append(PartialRanking.from_order(reviewer, items[order]))
    return partials
