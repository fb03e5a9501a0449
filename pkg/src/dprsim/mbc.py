"""Modified Borda Count: positional scoring of partial rankings.

Each reviewer's list hands out ``n_r - 1`` points for the best position down
to 0 for the worst.  A tie group shares the points of the positions it spans
equally, so the total handed out per reviewer is always ``n_r(n_r - 1)/2``.
A proposal's score is its point sum normalized by the maximum it could have
received, which puts every score in ``[0, 1]``.
"""

from __future__ import annotations

from collections.abc import Sequence

import numpy as np

from .rankings import PartialRanking, as_ranking


def mbc_scores(
    partials: Sequence[PartialRanking], n_r: int, n_p: int | None = None
) -> np.ndarray:
    """Score proposals by normalized Borda points from partial rankings.

    Within each list the positions carry ``n_r - 1 .. 0`` points; a tie group
    of size ``g`` gives each member the mean of the ``g`` covered positions'
    points.  A proposal reviewed ``t`` times is normalized by ``t * (n_r - 1)``,
    which reduces to the usual ``n_r(n_r - 1)`` denominator when every
    proposal is reviewed ``n_r`` times.

    Args:
        partials: Reviewer lists, each ranking exactly ``n_r`` proposals.
        n_r: Number of proposals per list (the point scale).
        n_p: Number of proposals; inferred from the largest id if omitted.

    Returns:
        Array of per-proposal scores in ``[0, 1]``; never-reviewed proposals
        score 0.
    """
    if n_r < 2:
        raise ValueError(f"n_r must be at least 2, got {n_r}")
    partials = list(partials)
    if n_p is None:
        n_p = 1 + max((p for pr in partials for p in pr.proposals()), default=-1)
        if n_p <= 0:
            raise ValueError("cannot infer n_p from empty input")
    points = np.zeros(n_p, dtype=np.float64)
    reviewed = np.zeros(n_p, dtype=np.int64)
    for pr in partials:
        if pr.size != n_r:
            raise ValueError(
                f"reviewer {pr.reviewer} ranked {pr.size} proposals, expected {n_r}"
            )
        position = 0
        for group in pr.groups:
            g = len(group)
            # mean of points (n_r-1-position) .. (n_r-position-g)
            shared = n_r - 1 - position - (g - 1) / 2.0
            for p in group:
                if p >= n_p:
                    raise ValueError(f"proposal id {p} out of range for n_p={n_p}")
                points[p] += shared
                reviewed[p] += 1
            position += g
    scores = np.zeros(n_p, dtype=np.float64)
    seen = reviewed > 0
    scores[seen] = points[seen] / (reviewed[seen] * (n_r - 1))
    return scores


def mbc_rank(scores: Sequence[float]) -> np.ndarray:
    """Rank proposals by descending score, breaking exact ties by ascending id."""
    s = np.asarray(scores, dtype=np.float64)
    if not np.isfinite(s).all():
        raise ValueError("scores must be finite")
    return np.lexsort((np.arange(s.shape[0]), -s)).astype(np.int64)


def mbc_aggregate(
    partials: Sequence[PartialRanking], n_r: int, n_p: int | None = None
) -> np.ndarray:
    """Global ranking from partial rankings: `mbc_scores` then `mbc_rank`."""
    return mbc_rank(mbc_scores(partials, n_r, n_p))


def mbc_over_rankings(rankings: Sequence[Sequence[int]]) -> np.ndarray:
    """Aggregate full rankings by treating each as a ballot over all proposals.

    Each ranking hands out ``n_p - 1 .. 0`` points by position, exactly as a
    partial ranking with ``n_r = n_p`` would.  Ties in the summed points are
    broken by ascending proposal id.

    Args:
        rankings: Non-empty collection of permutations of the same ids.
    """
    if len(rankings) == 0:
        raise ValueError("cannot aggregate an empty set of rankings")
    mat = np.vstack([as_ranking(r) for r in rankings])
    n_p = mat.shape[1]
    if n_p < 1:
        raise ValueError("rankings must be non-empty")
    positions = np.argsort(mat, axis=1, kind="stable")
    total_points = (n_p - 1) * mat.shape[0] - positions.sum(axis=0)
    return mbc_rank(total_points.astype(np.float64))
