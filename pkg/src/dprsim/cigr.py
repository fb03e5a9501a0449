"""Concordance-maximizing global ranking via simulated annealing.

The search minimizes the number of ranking pairs that disagree with the RCM
matrix (equivalently, maximizes concordance with the reviewers' pairwise
votes).  Candidate moves swap the two proposals of a currently disagreeing
pair; worse candidates are accepted with the Metropolis probability
``exp(-delta / T)`` under a geometric cooling schedule.  Stalled chains
restart from a random member of the maintained near-optimal set, and the
final ranking aggregates that whole set with Borda points, which is more
stable than returning the single best ranking found.
"""

from __future__ import annotations

import itertools
import math
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from .mbc import mbc_over_rankings, mbc_rank
from .rankings import PartialRanking, build_rcm

#: Hard ceiling for the exhaustive minimizer; 10! permutations is the most
#: that enumerates in tolerable time and memory.
EXACT_SEARCH_LIMIT = 10

_DEFAULT_ITERS_PER_PROPOSAL = 50_000


@dataclass(frozen=True)
class AnnealParams:
    """Knobs of the annealing schedule.

    Attributes:
        t0: Initial temperature; 0 gives strict descent.
        beta: Geometric cooling factor applied every iteration, in [0, 1).
        epsilon: Cost slack for the near-optimal set.
        rho: Patience; a chain restarts once the iterations since the last
            acceptance exceed ``rho`` times the current disagreeing-pair count.
        max_restarts: Restart budget before the search stops.
        max_iters: Total iteration budget; ``None`` picks a context default
            (candidate proposals for the ranking search, trades for
            assignment balancing).
        seed: Seed for the search's private random stream.
    """

    t0: float = 1.0
    beta: float = 0.999
    epsilon: int = 1
    rho: float = 3.0
    max_restarts: int = 30
    max_iters: int | None = None
    seed: int = 0

    def __post_init__(self) -> None:
        if self.t0 < 0:
            raise ValueError(f"t0 must be non-negative, got {self.t0}")
        if not 0.0 <= self.beta < 1.0:
            raise ValueError(f"beta must lie in [0, 1), got {self.beta}")
        if self.epsilon < 0:
            raise ValueError(f"epsilon must be non-negative, got {self.epsilon}")
        if self.rho <= 0:
            raise ValueError(f"rho must be positive, got {self.rho}")
        if self.max_restarts < 0:
            raise ValueError(f"max_restarts must be non-negative, got {self.max_restarts}")
        if self.max_iters is not None and self.max_iters < 1:
            raise ValueError(f"max_iters must be positive, got {self.max_iters}")


@dataclass(frozen=True)
class CigrResult:
    """Outcome of one annealing search.

    Attributes:
        ranking: Borda aggregate of the near-optimal set, best first.
        best_cost: Lowest disagreement count seen.
        near_optimal_set: Distinct rankings with cost within ``epsilon`` of
            ``best_cost``, in discovery order.
        iterations_used: Candidate proposals evaluated.
        restarts_used: Restarts taken.
    """

    ranking: np.ndarray
    best_cost: int
    near_optimal_set: tuple[tuple[int, ...], ...]
    iterations_used: int
    restarts_used: int


def cost_delta(ranking: Sequence[int], i: int, j: int, rcm: np.ndarray) -> int:
    """Cost change from swapping the proposals at positions ``i < j``.

    Only the swapped pair and pairs crossing the positions strictly between
    them can change contribution, so the work is O(j - i) instead of a full
    recomputation.
    """
    if not 0 <= i < j < len(ranking):
        raise ValueError(f"positions must satisfy 0 <= i < j < n, got ({i}, {j})")
    r = ranking
    a = r[i]
    b = r[j]
    delta = int(rcm[b, a] < rcm[a, b]) - int(rcm[a, b] < rcm[b, a])
    for k in range(i + 1, j):
        c = r[k]
        delta += int(rcm[b, c] < rcm[c, b]) - int(rcm[a, c] < rcm[c, a])
        delta += int(rcm[c, a] < rcm[a, c]) - int(rcm[c, b] < rcm[b, c])
    return delta


def exact_kemeny(rcm: np.ndarray) -> tuple[np.ndarray, int]:
    """Exhaustively find a minimal-disagreement ranking (test oracle).

    Enumerates every permutation, so it refuses instances beyond
    ``EXACT_SEARCH_LIMIT`` proposals.  Ties are resolved in favor of the
    lexicographically first permutation.

    Returns:
        The minimal-cost ranking and its cost.
    """
    n = rcm.shape[0]
    if n > EXACT_SEARCH_LIMIT:
        raise ValueError(
            f"exact search limited to {EXACT_SEARCH_LIMIT} proposals, got {n}"
        )
    if n == 0:
        raise ValueError("empty rcm")
    perms = np.array(list(itertools.permutations(range(n))), dtype=np.int8)
    disagree = (rcm < rcm.T).astype(np.int32)
    costs = np.zeros(perms.shape[0], dtype=np.int32)
    for a in range(n):
        for b in range(a + 1, n):
            costs += disagree[perms[:, a], perms[:, b]]
    k = int(np.argmin(costs))
    return perms[k].astype(np.int64), int(costs[k])


def _warm_start(partials: Sequence[PartialRanking], n_p: int) -> np.ndarray:
    """Borda-style starting ranking; equals the MBC ranking for regular input."""
    points = np.zeros(n_p, dtype=np.float64)
    reviewed = np.zeros(n_p, dtype=np.int64)
    for pr in partials:
        total = pr.size
        if total < 2:
            continue
        position = 0
        for group in pr.groups:
            g = len(group)
            shared = (total - 1 - position - (g - 1) / 2.0) / (total - 1)
            for p in group:
                points[p] += shared
                reviewed[p] += 1
            position += g
    scores = np.zeros(n_p, dtype=np.float64)
    seen = reviewed > 0
    scores[seen] = points[seen] / reviewed[seen]
    return mbc_rank(scores)


def cigr_search(
    partials: Sequence[PartialRanking],
    n_p: int,
    params: AnnealParams | None = None,
    warm_start: bool = True,
) -> CigrResult:
    """Search for a global ranking of maximal concordance with the reviews.

    Builds the RCM matrix, anneals from a Borda warm start (or a uniformly
    random permutation when ``warm_start`` is false), collects every visited
    ranking whose cost stays within ``params.epsilon`` of the best, and
    returns the Borda aggregate of that set.  A ranking with zero
    disagreeing pairs is a global optimum and is returned as soon as it is
    reached, since no candidate move remains.

    Deterministic for a fixed input and ``params.seed``.
    """
    params = params or AnnealParams()
    partials = list(partials)
    if not partials:
        raise ValueError("cannot search with no partial rankings")
    if n_p < 2:
        raise ValueError(f"need at least two proposals, got n_p={n_p}")

    rcm = build_rcm(partials, n_p)
    rng = np.random.default_rng(params.seed & 0xFFFFFFFFFFFFFFFF)
    if warm_start:
        start = _warm_start(partials, n_p)
    else:
        start = rng.permutation(n_p).astype(np.int64)

    max_iters = params.max_iters
    if max_iters is None:
        max_iters = _DEFAULT_ITERS_PER_PROPOSAL * n_p

    disagree = rcm < rcm.T
    dis = disagree.tolist()  # nested lists: fastest scalar access in the loop

    r_np = start.copy()
    r = r_np.tolist()
    pair_matrix = np.triu(disagree[np.ix_(r_np, r_np)], k=1)
    current_cost = int(pair_matrix.sum())
    flat = pair_matrix.ravel()

    best_cost = current_cost
    near_set: dict[tuple[int, ...], int] = {tuple(r): current_cost}

    iterations = 0
    restarts = 0
    temperature = params.t0
    since_accept = 0
    stale_flat = False
    flat_idx = np.flatnonzero(flat)

    def finish(ranking: np.ndarray | None = None) -> CigrResult:
        members = tuple(near_set)
        aggregate = ranking if ranking is not None else mbc_over_rankings(members)
        return CigrResult(
            ranking=np.asarray(aggregate, dtype=np.int64),
            best_cost=best_cost,
            near_optimal_set=members,
            iterations_used=iterations,
            restarts_used=restarts,
        )

    if current_cost == 0:
        return finish(r_np)

    exp = math.exp
    randu = rng.random
    randint = rng.integers

    while iterations < max_iters:
        # The disagreeing-pair count equals the current cost by definition.
        if since_accept > params.rho * current_cost:
            if restarts >= params.max_restarts:
                break
            restarts += 1
            members = list(near_set)
            pick = members[int(randint(len(members)))]
            r_np = np.array(pick, dtype=np.int64)
            r = list(pick)
            pair_matrix = np.triu(disagree[np.ix_(r_np, r_np)], k=1)
            current_cost = int(pair_matrix.sum())
            flat = pair_matrix.ravel()
            stale_flat = True
            temperature = params.t0
            since_accept = 0

        if stale_flat:
            flat_idx = np.flatnonzero(flat)
            stale_flat = False

        iterations += 1
        choice = int(flat_idx[int(randint(flat_idx.shape[0]))])
        i, j = divmod(choice, n_p)
        a = r[i]
        b = r[j]
        dis_a = dis[a]
        dis_b = dis[b]
        delta = dis_b[a] - dis_a[b]
        for k in range(i + 1, j):
            c = r[k]
            dc = dis[c]
            delta += dis_b[c] - dis_a[c] + dc[a] - dc[b]

        if delta <= 0 or (
            temperature > 0.0 and randu() < exp(-delta / temperature)
        ):
            r[i] = b
            r[j] = a
            r_np[i] = b
            r_np[j] = a
            for pos in (i, j):
                e = r[pos]
                pair_matrix[:pos, pos] = disagree[r_np[:pos], e]
                pair_matrix[pos, pos + 1 :] = disagree[e, r_np[pos + 1 :]]
            current_cost += delta
            stale_flat = True
            since_accept = 0
            if current_cost < best_cost:
                best_cost = current_cost
                bar = best_cost + params.epsilon
                near_set = {m: c for m, c in near_set.items() if c <= bar}
            if current_cost <= best_cost + params.epsilon:
                near_set.setdefault(tuple(r), current_cost)
            if current_cost == 0:
                # Global optimum: no disagreeing pair is left to move, so the
                # chain has no candidates and this ranking is the result.
                near_set = {tuple(r): 0}
                return finish(r_np)
        else:
            since_accept += 1
        temperature *= params.beta

    return finish()
