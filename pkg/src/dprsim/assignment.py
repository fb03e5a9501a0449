"""Review assignment under conflict constraints, and entropy balancing.

An assignment hands each of ``n`` reviewers a set of ``m`` proposals such
that nobody reviews a forbidden proposal (always including their own) and
every proposal is reviewed exactly ``m`` times.  The balancing step spreads
the head-to-head proposal pairs as uniformly as possible across reviewers,
measured by the Shannon entropy of the pair-count matrix, using the same
Metropolis/annealing machinery as the ranking search but over proposal
trades between two reviewers.
"""

from __future__ import annotations

import math
import warnings
from bisect import insort
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass

import numpy as np

from .cigr import AnnealParams

_TRADES_PER_SLOT = 200
_CAP_TOLERANCE = 1e-9


class InfeasibleAssignmentError(ValueError):
    """Raised when no valid assignment can be constructed for the constraints."""


class NoTradeWarning(UserWarning):
    """Emitted when balancing finds no tradeable pair and returns its input."""


@dataclass(frozen=True)
class Constraints:
    """Per-reviewer forbidden proposal sets.

    Reviewer ``i`` may never review proposal ``i``; that entry is added
    automatically if missing.
    """

    forbidden: tuple[frozenset[int], ...]

    def __post_init__(self) -> None:
        normalized = tuple(
            frozenset(entry) | {i} for i, entry in enumerate(self.forbidden)
        )
        object.__setattr__(self, "forbidden", normalized)

    @classmethod
    def self_review(cls, n: int) -> "Constraints":
        """Constraints forbidding only each reviewer's own proposal."""
        return cls(tuple(frozenset((i,)) for i in range(n)))

    @classmethod
    def from_mapping(cls, n: int, extra: Mapping[int, Iterable[int]]) -> "Constraints":
        """Self-review constraints extended with extra forbidden proposals."""
        return cls(tuple(frozenset(extra.get(i, ())) | {i} for i in range(n)))

    @property
    def n(self) -> int:
        return len(self.forbidden)


@dataclass(frozen=True)
class Assignment:
    """Reviewer-to-proposals map; ``reviews[i]`` is reviewer ``i``'s set."""

    reviews: tuple[tuple[int, ...], ...]

    def __post_init__(self) -> None:
        sizes = {len(r) for r in self.reviews}
        if len(sizes) > 1:
            raise ValueError(f"reviewers hold unequal review loads: {sorted(sizes)}")
        for i, props in enumerate(self.reviews):
            if len(set(props)) != len(props):
                raise ValueError(f"reviewer {i} holds a duplicate proposal")
        object.__setattr__(
            self, "reviews", tuple(tuple(sorted(r)) for r in self.reviews)
        )

    @property
    def n(self) -> int:
        return len(self.reviews)

    @property
    def m(self) -> int:
        return len(self.reviews[0]) if self.reviews else 0

    def review_counts(self, n_p: int) -> np.ndarray:
        """Times each proposal is reviewed."""
        counts = np.zeros(n_p, dtype=np.int64)
        for props in self.reviews:
            for p in props:
                counts[p] += 1
        return counts

    def satisfies(self, constraints: Constraints) -> bool:
        return all(
            not (set(props) & constraints.forbidden[i])
            for i, props in enumerate(self.reviews)
        )


def _trade_options(
    reviews: Sequence[Sequence[int]],
    forbidden: Sequence[frozenset[int]],
    i: int,
    j: int,
) -> tuple[list[int], list[int]]:
    """Proposals reviewer i may hand to j and vice versa.

    Any combination of one proposal from each side is a valid trade: the
    sides are disjoint, neither receiver already holds or is forbidden from
    the incoming proposal.
    """
    give_i = [p for p in reviews[i] if p not in reviews[j] and p not in forbidden[j]]
    give_j = [q for q in reviews[j] if q not in reviews[i] and q not in forbidden[i]]
    return give_i, give_j


def _sample_trade(
    reviews: Sequence[Sequence[int]],
    forbidden: Sequence[frozenset[int]],
    rng: np.random.Generator,
    max_tries: int,
) -> tuple[int, int, int, int] | None:
    """Draw a random valid trade (i, j, give_i, give_j), or None if none exists.

    Random reviewer pairs are tried first; if every try fails, an exhaustive
    sweep settles whether any tradeable pair exists at all.
    """
    n = len(reviews)
    for _ in range(max_tries):
        i = int(rng.integers(n))
        j = int(rng.integers(n - 1))
        if j >= i:
            j += 1
        give_i, give_j = _trade_options(reviews, forbidden, i, j)
        if give_i and give_j:
            p = give_i[int(rng.integers(len(give_i)))]
            q = give_j[int(rng.integers(len(give_j)))]
            return i, j, p, q
    tradeable = [
        (i, j)
        for i in range(n)
        for j in range(i + 1, n)
        if all(_trade_options(reviews, forbidden, i, j))
    ]
    if not tradeable:
        return None
    i, j = tradeable[int(rng.integers(len(tradeable)))]
    give_i, give_j = _trade_options(reviews, forbidden, i, j)
    p = give_i[int(rng.integers(len(give_i)))]
    q = give_j[int(rng.integers(len(give_j)))]
    return i, j, p, q


def _apply_trade(reviews: list[list[int]], i: int, j: int, p: int, q: int) -> None:
    reviews[i].remove(p)
    insort(reviews[i], q)
    reviews[j].remove(q)
    insort(reviews[j], p)


def random_assignment(
    n: int,
    m: int,
    constraints: Constraints | None = None,
    seed: int = 0,
) -> Assignment:
    """Generate a valid regular assignment, decorrelated by random trades.

    A randomly relabeled circulant layout hands reviewer ``pi[i]`` the
    proposals ``pi[i+1] .. pi[i+m]`` (indices modulo ``n``), which is regular
    and self-review-free by construction.  ``n * m`` random trades then
    decorrelate the layout.  Constraints beyond self-review are enforced by
    randomized repair trades afterwards.

    Raises:
        InfeasibleAssignmentError: If some reviewer has fewer than ``m``
            permitted proposals, or repair cannot satisfy the constraints
            within its trade budget.
    """
    if not 2 <= m < n:
        raise ValueError(f"need 2 <= m < n, got n={n}, m={m}")
    constraints = constraints or Constraints.self_review(n)
    if constraints.n != n:
        raise ValueError(f"constraints cover {constraints.n} reviewers, expected {n}")
    for i, banned in enumerate(constraints.forbidden):
        if n - len(banned & set(range(n))) < m:
            raise InfeasibleAssignmentError(
                f"reviewer {i} has fewer than {m} permitted proposals"
            )

    rng = np.random.default_rng(seed & 0xFFFFFFFFFFFFFFFF)
    pi = rng.permutation(n)
    reviews: list[list[int]] = [[] for _ in range(n)]
    for i in range(n):
        reviews[int(pi[i])] = sorted(int(pi[(i + 1 + k) % n]) for k in range(m))

    forbidden = constraints.forbidden
    for _ in range(n * m):
        trade = _sample_trade(reviews, forbidden, rng, max_tries=20)
        if trade is None:
            break
        _apply_trade(reviews, *trade)

    # repair pass for constraints beyond self-review; each successful trade
    # removes one violation and can never introduce a new one
    for _ in range(_TRADES_PER_SLOT * n):
        violations = [
            (i, p) for i in range(n) for p in reviews[i] if p in forbidden[i]
        ]
        if not violations:
            break
        i, p = violations[int(rng.integers(len(violations)))]
        moved = False
        for j in (int(x) for x in rng.permutation(n)):
            if j == i or p in reviews[j] or p in forbidden[j]:
                continue
            incoming = [
                q for q in reviews[j] if q not in reviews[i] and q not in forbidden[i]
            ]
            if not incoming:
                continue
            q = incoming[int(rng.integers(len(incoming)))]
            _apply_trade(reviews, i, j, p, q)
            moved = True
            break
        if not moved:
            raise InfeasibleAssignmentError(
                f"cannot place reviewer {i}'s forbidden proposal {p} elsewhere"
            )
    remaining = [i for i in range(n) if any(p in forbidden[i] for p in reviews[i])]
    if remaining:
        raise InfeasibleAssignmentError(
            f"constraint repair budget exhausted; reviewer {remaining[0]} still in conflict"
        )

    return Assignment(tuple(tuple(r) for r in reviews))


def pair_counts(assignment: Assignment, n_p: int) -> np.ndarray:
    """Symmetric matrix counting reviewers that hold both proposals of a pair."""
    alpha = np.zeros((n_p, n_p), dtype=np.int64)
    for props in assignment.reviews:
        items = sorted(props)
        for x in range(len(items)):
            for y in range(x + 1, len(items)):
                alpha[items[x], items[y]] += 1
                alpha[items[y], items[x]] += 1
    return alpha


def entropy(alpha: np.ndarray, n: int, m: int) -> float:
    """Shannon entropy (natural log) of the pair-count distribution.

    The ``n * m(m-1)/2`` compared pairs are treated as a distribution over
    the distinct proposal pairs; zero counts contribute nothing.
    """
    mass = n * m * (m - 1) // 2
    upper = alpha[np.triu_indices(alpha.shape[0], k=1)]
    total = int(upper.sum())
    if total != mass:
        raise ValueError(f"pair mass {total} does not match n*m(m-1)/2 = {mass}")
    vals = upper[upper > 0] / mass
    return float(-(vals * np.log(vals)).sum())


def max_entropy(n: int, m: int) -> float:
    """Entropy of the most uniform integer spread of the pair mass.

    ``n * m(m-1)/2`` pairs spread over ``C(n, 2)`` cells as evenly as integer
    counts allow; this is the cap any balanced assignment can reach.
    """
    mass = n * m * (m - 1) // 2
    cells = n * (n - 1) // 2
    q, rem = divmod(mass, cells)
    h = 0.0
    if q > 0:
        h -= (cells - rem) * (q / mass) * math.log(q / mass)
    if rem > 0:
        h -= rem * ((q + 1) / mass) * math.log((q + 1) / mass)
    return h


class _BalanceState:
    """Mutable trade state: review lists, pair counts, and running entropy.

    Tracks the cells holding zero pairs and the cells holding three or more,
    which the polish phase targets directly.
    """

    def __init__(self, assignment: Assignment, n: int, m: int) -> None:
        self.n = n
        self.mass = n * m * (m - 1) // 2
        self.reviews: list[list[int]] = [list(r) for r in assignment.reviews]
        self.alpha: list[list[int]] = pair_counts(assignment, n).tolist()
        # h_term[a]: entropy contribution of one cell holding `a` pairs
        self.h_term = [0.0] * (n + 2)
        for a in range(1, n + 2):
            frac = a / self.mass
            self.h_term[a] = -frac * math.log(frac)
        self.value = entropy(pair_counts(assignment, n), n, m)
        self.holders: list[list[int]] = [[] for _ in range(n)]
        for i, props in enumerate(self.reviews):
            for p in props:
                self.holders[p].append(i)
        self.empty_cells: set[tuple[int, int]] = set()
        self.heavy_cells: set[tuple[int, int]] = set()
        for u in range(n):
            row = self.alpha[u]
            for v in range(u + 1, n):
                if row[v] == 0:
                    self.empty_cells.add((u, v))
                elif row[v] >= 3:
                    self.heavy_cells.add((u, v))

    def trade_sides(self, i: int, j: int, p: int, q: int) -> tuple[list[int], list[int]]:
        # cells touched from both sides cancel exactly (a shared proposal s
        # sees alpha[p][s] and alpha[q][s] each -1 and +1), so only the
        # non-shared proposals contribute
        reviews_i = self.reviews[i]
        reviews_j = self.reviews[j]
        side_i = [x for x in reviews_i if x != p and x not in reviews_j]
        side_j = [y for y in reviews_j if y != q and y not in reviews_i]
        return side_i, side_j

    def delta(self, i: int, j: int, p: int, q: int) -> float:
        side_i, side_j = self.trade_sides(i, j, p, q)
        h_term = self.h_term
        alpha_p = self.alpha[p]
        alpha_q = self.alpha[q]
        delta = 0.0
        for x in side_i:
            a = alpha_p[x]
            b = alpha_q[x]
            delta += h_term[a - 1] - h_term[a] + h_term[b + 1] - h_term[b]
        for y in side_j:
            a = alpha_q[y]
            b = alpha_p[y]
            delta += h_term[a - 1] - h_term[a] + h_term[b + 1] - h_term[b]
        return delta

    def _bump(self, u: int, v: int, d: int) -> None:
        new = self.alpha[u][v] + d
        self.alpha[u][v] = new
        self.alpha[v][u] = new
        cell = (u, v) if u < v else (v, u)
        if new == 0:
            self.empty_cells.add(cell)
        else:
            self.empty_cells.discard(cell)
        if new >= 3:
            self.heavy_cells.add(cell)
        else:
            self.heavy_cells.discard(cell)

    def apply(self, i: int, j: int, p: int, q: int, delta: float) -> None:
        side_i, side_j = self.trade_sides(i, j, p, q)
        _apply_trade(self.reviews, i, j, p, q)
        self.holders[p].remove(i)
        self.holders[p].append(j)
        self.holders[q].remove(j)
        self.holders[q].append(i)
        for x in side_i:
            self._bump(p, x, -1)
            self._bump(q, x, +1)
        for y in side_j:
            self._bump(q, y, -1)
            self._bump(p, y, +1)
        self.value += delta

    def snapshot(self) -> list[list[int]]:
        return [list(r) for r in self.reviews]


def _best_fill_trade(
    state: _BalanceState,
    u: int,
    v: int,
    forbidden: Sequence[frozenset[int]],
) -> tuple[float, int, int, int, int] | None:
    """Highest-entropy trade that makes some reviewer hold both u and v.

    Scans every (receiver, donor, give-back) combination in both directions:
    a holder of one proposal of the empty cell receives the other.  Shared
    per-(receiver, donor) terms of the entropy change are factored out so
    the give-back alternatives cost O(m) each.
    """
    h_term = state.h_term
    alpha = state.alpha
    best: tuple[float, int, int, int, int] | None = None
    for uu, vv in ((u, v), (v, u)):
        alpha_v = alpha[vv]
        for i in state.holders[uu]:
            reviews_i = state.reviews[i]
            if vv in reviews_i or vv in forbidden[i]:
                continue
            for j in state.holders[vv]:
                if j == i:
                    continue
                reviews_j = state.reviews[j]
                side_i = [x for x in reviews_i if x not in reviews_j]
                side_j = [y for y in reviews_j if y != vv and y not in reviews_i]
                # terms independent of the give-back choice
                base = 0.0
                for y in side_j:
                    a = alpha_v[y]
                    base += h_term[a - 1] - h_term[a]
                gain_v = 0.0
                for x in side_i:
                    b = alpha_v[x]
                    gain_v += h_term[b + 1] - h_term[b]
                banned_j = forbidden[j]
                for p in side_i:
                    if p == uu or p in banned_j:
                        continue
                    alpha_p = alpha[p]
                    b = alpha_v[p]
                    d = base + gain_v - (h_term[b + 1] - h_term[b])
                    for x in side_i:
                        if x != p:
                            a = alpha_p[x]
                            d += h_term[a - 1] - h_term[a]
                    for y in side_j:
                        a = alpha_p[y]
                        d += h_term[a + 1] - h_term[a]
                    if best is None or d > best[0]:
                        best = (d, i, j, p, vv)
    return best


def _polish(
    state: _BalanceState,
    forbidden: Sequence[frozenset[int]],
    rng: np.random.Generator,
    budget: int,
    stop_at: float,
) -> tuple[float, list[list[int]] | None]:
    """Directed walk filling empty pair cells; returns the best clean state.

    Uniform trade proposals almost never hit the few useful moves near the
    entropy optimum, and equilibrium acceptance rules stall in frustrated
    configurations.  This walk instead always applies the best trade that
    fills a randomly chosen empty cell, letting quality fluctuate, and
    snapshots every new best among the states with no over-filled cell
    (count of 3 or more).  The non-equilibrium pressure visits near-uniform
    configurations that Metropolis dynamics reach too slowly.
    """
    heavy_free = not state.heavy_cells
    best_value = state.value if heavy_free else -math.inf
    best_reviews = state.snapshot() if heavy_free else None
    stall_limit = max(1500, budget // 3)
    since_best = 0
    for _ in range(budget):
        if best_value >= stop_at or not state.empty_cells or since_best > stall_limit:
            break
        cells = sorted(state.empty_cells)
        u, v = cells[int(rng.integers(len(cells)))]
        move = _best_fill_trade(state, u, v, forbidden)
        if move is None:
            since_best += 1
            continue
        state.apply(*move[1:], move[0])
        if state.value > best_value and not state.heavy_cells:
            best_value = state.value
            best_reviews = state.snapshot()
            since_best = 0
        else:
            since_best += 1
    return best_value, best_reviews


def balance(
    assignment: Assignment,
    constraints: Constraints | None = None,
    params: AnnealParams | None = None,
    polish_budget: int | None = None,
) -> Assignment:
    """Rebalance an assignment by annealing trades toward maximal pair entropy.

    Each iteration draws two reviewers and a random tradeable proposal pair
    between them, accepts the trade when entropy does not drop, and
    otherwise accepts with probability ``exp(delta_H / T)``.  Trades move
    one copy of each proposal between reviewers, so per-proposal review
    counts, review loads, and constraint satisfaction are all preserved.
    A targeted polish phase then repairs the remaining unbalanced cells,
    which uniform proposals reach far too rarely (see `_polish`).  The best
    assignment observed is returned, never one worse than the input.

    The annealing phase stops at the iteration budget (``params.max_iters``
    or ``200 * n * m``) or as soon as the entropy reaches the integer-uniform
    cap; ``polish_budget`` defaults to ``60 * n * m`` targeted attempts
    (0 disables polishing).  Warns with `NoTradeWarning` and returns the
    input when no tradeable pair exists.
    """
    params = params or AnnealParams()
    n = assignment.n
    m = assignment.m
    constraints = constraints or Constraints.self_review(n)
    if constraints.n != n:
        raise ValueError(f"constraints cover {constraints.n} reviewers, expected {n}")
    if not assignment.satisfies(constraints):
        raise ValueError("input assignment violates the constraints")

    cap = max_entropy(n, m)
    stop_at = cap - _CAP_TOLERANCE
    max_iters = (
        params.max_iters if params.max_iters is not None else _TRADES_PER_SLOT * n * m
    )
    if polish_budget is None:
        polish_budget = 60 * n * m

    rng = np.random.default_rng(params.seed & 0xFFFFFFFFFFFFFFFF)
    forbidden = constraints.forbidden
    exp = math.exp
    randu = rng.random

    def anneal_phase(state: _BalanceState) -> bool:
        """Uniform-trade Metropolis phase; False when no trade exists."""
        temperature = params.t0
        for _ in range(max_iters):
            if state.value >= stop_at:
                break
            trade = _sample_trade(state.reviews, forbidden, rng, max_tries=50)
            if trade is None:
                return False
            i, j, p, q = trade
            delta = state.delta(i, j, p, q)
            if delta >= 0 or (
                temperature > 0.0 and randu() < exp(delta / temperature)
            ):
                state.apply(i, j, p, q, delta)
            temperature *= params.beta
        return True

    state = _BalanceState(assignment, n, m)
    start_value = state.value
    best_value = state.value
    best_reviews = state.snapshot()

    tradeable = anneal_phase(state)
    if state.value > best_value:
        best_value = state.value
        best_reviews = state.snapshot()
    if not tradeable:
        warnings.warn(
            "no tradeable pair exists; returning assignment unchanged",
            NoTradeWarning,
        )

    # polish in rounds: a round that improves the best keeps its momentum,
    # while a fruitless round triggers a fresh anneal from the input
    # assignment, making the next round an effectively independent attempt
    remaining = polish_budget if tradeable else 0
    improved_last = True
    while remaining > 0 and best_value < stop_at:
        if not improved_last and remaining >= 4000:
            state = _BalanceState(assignment, n, m)
            anneal_phase(state)
        elif state.value < best_value:
            # polish from the best state seen, not wherever the chain drifted
            state = _BalanceState(
                Assignment(tuple(tuple(r) for r in best_reviews)), n, m
            )
        chunk = min(remaining, 4000)
        remaining -= chunk
        polished_value, polished_reviews = _polish(
            state, forbidden, rng, budget=chunk, stop_at=stop_at
        )
        improved_last = (
            polished_reviews is not None and polished_value > best_value + 1e-12
        )
        if improved_last:
            best_value = polished_value
            best_reviews = polished_reviews

    result = Assignment(tuple(tuple(r) for r in best_reviews))
    # guard against float drift in the running entropy: never return an
    # assignment measurably worse than the input
    if entropy(pair_counts(result, n), n, m) < start_value:
        return assignment
    return result
