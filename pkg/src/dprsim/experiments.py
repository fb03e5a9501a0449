"""Monte Carlo studies of the review pipeline.

Every replicate walks the full pipeline: true scores -> reviewer profiles ->
assignment (random or entropy-balanced) -> simulated reviews -> aggregation
(MBC or annealing search) -> metrics against the truth.  Replicates are
paired across methods, modes, and grid points through common random numbers:
per-replicate streams are derived from the master seed and replicate index
only, so both arms of any comparison consume identical draws.

All runners are deterministic for a fixed seed at any worker count; results
are keyed by replicate index and reduced in index order.
"""

from __future__ import annotations

from collections.abc import Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np
from scipy import stats

from .assignment import Constraints, balance, random_assignment
from .cigr import AnnealParams, cigr_search
from .mbc import mbc_aggregate
from .rankings import (
    MetricReport,
    PartialRanking,
    fit_concordance,
    top_fraction_accuracy,
    truth_concordance,
)
from .simulate import (
    ALGORITHM_STREAM,
    ASSIGNMENT_STREAM,
    BALANCE_STREAM,
    PROFILES_STREAM,
    REVIEWS_STREAM,
    SCORES_STREAM,
    SimParams,
    sample_reviewers,
    sample_true_scores,
    simulate_reviews,
    stream,
    stream_seed,
    true_ranking,
)

METHODS = ("mbc", "cigr")
MODES = ("random", "balanced")

TOP_FRACTION = 0.2

#: Annealing schedule for the ranking search inside experiment replicates.
#: Lighter than the library default so thousand-replicate studies stay
#: tractable; quality was checked against the exhaustive oracle at small n_p.
EXPERIMENT_ANNEAL = AnnealParams(
    t0=0.3, beta=0.995, epsilon=1, rho=3.0, max_restarts=12, max_iters=60_000
)

#: Trade budget for per-replicate balancing; enough to come within a couple
#: percent of the entropy cap at the default problem size.  The full-quality
#: polish stays off inside replicates: its cost per call dwarfs the rest of
#: the pipeline, and partial balance already carries the assignment effect.
BALANCE_ANNEAL = AnnealParams(t0=0.02, beta=0.9995, max_iters=12_000)

EXPERIMENT_BALANCE_POLISH = 0

_STAGE_ROLE_STRIDE = 16


@dataclass(frozen=True)
class SweepSpec:
    """One parameter sweep: a grid over one `SimParams` field.

    Attributes:
        param: Field of `SimParams` being varied.
        grid: Values the field takes, in output order.
        base: Fixed parameters (including the master seed).
        methods: Aggregation methods to evaluate at each point.
        mode: Assignment mode, ``random`` or ``balanced``.
        replicates: Replicates per grid point.
        confidence: Confidence level for the reported halfwidths.
    """

    param: str
    grid: tuple[float, ...]
    base: SimParams
    methods: tuple[str, ...] = ("mbc",)
    mode: str = "random"
    replicates: int = 1000
    confidence: float = 0.999

    def __post_init__(self) -> None:
        if self.param not in SimParams.__dataclass_fields__:
            raise ValueError(f"unknown parameter {self.param!r}")
        if not self.grid:
            raise ValueError("sweep grid is empty")
        if self.replicates < 1:
            raise ValueError("need at least one replicate")
        for m in self.methods:
            if m not in METHODS:
                raise ValueError(f"unknown method {m!r}")
        if self.mode not in MODES:
            raise ValueError(f"unknown assignment mode {self.mode!r}")
        if not 0.0 < self.confidence < 1.0:
            raise ValueError("confidence must lie in (0, 1)")


@dataclass(frozen=True)
class SweepRow:
    """Aggregated metrics for one (grid value, method, mode) cell."""

    param: str
    value: float
    method: str
    mode: str
    mean_ci: float
    ci_hw: float
    mean_t02: float
    t02_hw: float
    n_reps: int


@dataclass(frozen=True)
class MethodComparison:
    """Paired comparison of the two aggregation methods on one condition."""

    params: SimParams
    mode: str
    mean_mbc: float
    mean_cigr: float
    mean_diff: float  # cigr - mbc on ranking concordance
    p_value: float
    n_reps: int


@dataclass(frozen=True)
class BalanceEffect:
    """Paired effect of balancing on one method at one error level."""

    method: str
    er_df: float
    mean_gain: float  # balanced - random on ranking concordance
    p_value: float
    n_reps: int


@dataclass(frozen=True)
class BoundaryPoint:
    """Error level at which method superiority flips, for one score spread."""

    sd_s: float
    er_cross: float | None  # None when no sign change falls inside the grid

    @property
    def censored(self) -> bool:
        return self.er_cross is None


@dataclass(frozen=True)
class BoundaryFit:
    """Least-squares line through the uncensored crossing points."""

    slope: float
    intercept: float
    slope_se: float
    slope_ci_low: float
    slope_ci_high: float
    confidence: float
    n_points: int


@dataclass(frozen=True)
class BoundaryResult:
    points: tuple[BoundaryPoint, ...]
    fit: BoundaryFit | None


def aggregate_ranking(
    partials: Sequence[PartialRanking],
    n_p: int,
    n_r: int,
    method: str,
    seed: int = 0,
    anneal: AnnealParams | None = None,
) -> np.ndarray:
    """Produce a global ranking from partial rankings by the named method."""
    if method == "mbc":
        return mbc_aggregate(partials, n_r, n_p)
    if method == "cigr":
        params = replace(anneal or EXPERIMENT_ANNEAL, seed=seed)
        return cigr_search(partials, n_p, params).ranking
    raise ValueError(f"unknown method {method!r}")


def _simulated_round(
    p: SimParams,
    mode: str,
    replicate: int,
    balance_params: AnnealParams | None,
) -> tuple[np.ndarray, list]:
    """Truth scores and partial rankings for one replicate and mode."""
    truth = sample_true_scores(p.n_p, p.sd_s, stream(p.seed, replicate, SCORES_STREAM))
    profiles = sample_reviewers(
        p.n_p, p.br_sd, p.er_df, stream(p.seed, replicate, PROFILES_STREAM)
    )
    assignment = random_assignment(
        p.n_p, p.n_r, seed=stream_seed(p.seed, replicate, ASSIGNMENT_STREAM)
    )
    if mode == "balanced":
        params = replace(
            balance_params or BALANCE_ANNEAL,
            seed=stream_seed(p.seed, replicate, BALANCE_STREAM),
        )
        assignment = balance(
            assignment,
            Constraints.self_review(p.n_p),
            params,
            polish_budget=EXPERIMENT_BALANCE_POLISH,
        )
    partials = simulate_reviews(
        truth, profiles, assignment, stream(p.seed, replicate, REVIEWS_STREAM)
    )
    return truth, partials


def _score_ranking(
    inferred: np.ndarray, truth: np.ndarray, partials: Sequence[PartialRanking]
) -> MetricReport:
    reference = true_ranking(truth)
    return MetricReport(
        fit_ci=fit_concordance(inferred, partials),
        truth_ci=truth_concordance(inferred, reference),
        top_fraction_accuracy=top_fraction_accuracy(inferred, reference, TOP_FRACTION),
    )


def _bundle(
    p: SimParams,
    methods: Sequence[str],
    modes: Sequence[str],
    replicate: int,
    anneal: AnnealParams | None,
    balance_params: AnnealParams | None,
) -> dict[tuple[str, str], MetricReport]:
    """All requested (method, mode) reports for one replicate, sharing draws."""
    out: dict[tuple[str, str], MetricReport] = {}
    for mode in modes:
        truth, partials = _simulated_round(p, mode, replicate, balance_params)
        algo_seed = stream_seed(p.seed, replicate, ALGORITHM_STREAM)
        for method in methods:
            inferred = aggregate_ranking(
                partials, p.n_p, p.n_r, method, seed=algo_seed, anneal=anneal
            )
            out[(method, mode)] = _score_ranking(inferred, truth, partials)
    return out


def _bundle_task(args) -> tuple[int, dict[tuple[str, str], MetricReport]]:
    key, p, methods, modes, replicate, anneal, balance_params = args
    return key, _bundle(p, methods, modes, replicate, anneal, balance_params)


def _run_tasks(tasks: list, threads: int) -> dict:
    """Run bundle tasks, returning {key: bundle}; identical at any thread count."""
    results: dict = {}
    if threads <= 1 or len(tasks) <= 1:
        for task in tasks:
            key, bundle = _bundle_task(task)
            results[key] = bundle
        return results
    chunk = max(1, len(tasks) // (threads * 8))
    with ProcessPoolExecutor(max_workers=threads) as pool:
        for key, bundle in pool.map(_bundle_task, tasks, chunksize=chunk):
            results[key] = bundle
    return results


def run_replicate(
    p: SimParams,
    method: str = "mbc",
    mode: str = "random",
    replicate: int = 0,
    anneal: AnnealParams | None = None,
    balance_params: AnnealParams | None = None,
) -> MetricReport:
    """Run the full pipeline once and score the inferred ranking.

    Deterministic in ``(p, method, mode, replicate)``; methods and modes are
    paired through common random numbers, so two calls differing only in
    ``method`` consume identical truth, profiles, assignment, and reviews.
    """
    return _bundle(p, (method,), (mode,), replicate, anneal, balance_params)[
        (method, mode)
    ]


def run_replicates(
    p: SimParams,
    method: str = "mbc",
    mode: str = "random",
    replicates: int = 1000,
    threads: int = 1,
    anneal: AnnealParams | None = None,
    balance_params: AnnealParams | None = None,
) -> list[MetricReport]:
    """`run_replicate` over ``0..replicates-1``, in replicate order."""
    tasks = [
        (rep, p, (method,), (mode,), rep, anneal, balance_params)
        for rep in range(replicates)
    ]
    results = _run_tasks(tasks, threads)
    return [results[rep][(method, mode)] for rep in range(replicates)]


def _halfwidth(values: np.ndarray, confidence: float) -> float:
    if values.shape[0] < 2:
        return 0.0
    z = float(stats.norm.ppf(1.0 - (1.0 - confidence) / 2.0))
    return z * float(values.std(ddof=1)) / float(np.sqrt(values.shape[0]))


def _coerce(p: SimParams, param: str, value: float) -> SimParams:
    field_type = type(getattr(p, param))
    return replace(p, **{param: field_type(value)})


def sweep(
    spec: SweepSpec,
    threads: int = 1,
    anneal: AnnealParams | None = None,
    balance_params: AnnealParams | None = None,
) -> list[SweepRow]:
    """Mean metrics with confidence halfwidths over one parameter grid.

    Rows come out sorted by grid order then method, one row per
    (value, method) cell.
    """
    tasks = []
    for vi, value in enumerate(spec.grid):
        p = _coerce(spec.base, spec.param, value)
        for rep in range(spec.replicates):
            tasks.append(
                ((vi, rep), p, tuple(spec.methods), (spec.mode,), rep, anneal, balance_params)
            )
    results = _run_tasks(tasks, threads)

    rows: list[SweepRow] = []
    for vi, value in enumerate(spec.grid):
        for method in spec.methods:
            reports = [
                results[(vi, rep)][(method, spec.mode)]
                for rep in range(spec.replicates)
            ]
            ci = np.array([r.truth_ci for r in reports])
            t02 = np.array([r.top_fraction_accuracy for r in reports])
            rows.append(
                SweepRow(
                    param=spec.param,
                    value=float(value),
                    method=method,
                    mode=spec.mode,
                    mean_ci=float(ci.mean()),
                    ci_hw=_halfwidth(ci, spec.confidence),
                    mean_t02=float(t02.mean()),
                    t02_hw=_halfwidth(t02, spec.confidence),
                    n_reps=spec.replicates,
                )
            )
    return rows


def paired_pvalue(a: Sequence[float], b: Sequence[float]) -> float:
    """Two-sided paired t-test p-value with a degenerate-sample guard.

    A (numerically) constant difference yields 1.0 when the arms agree and
    0.0 when they differ, where the t statistic is undefined or meaningless.
    """
    diff = np.asarray(a, dtype=np.float64) - np.asarray(b, dtype=np.float64)
    spread = float(diff.max() - diff.min()) if diff.size else 0.0
    scale = max(float(np.abs(diff).max(initial=0.0)), 1.0)
    if diff.shape[0] < 2 or spread <= 1e-12 * scale:
        return 1.0 if float(np.abs(diff).max(initial=0.0)) == 0.0 else 0.0
    return float(stats.ttest_rel(np.asarray(a), np.asarray(b)).pvalue)


def compare_methods(
    p: SimParams,
    replicates: int = 200,
    mode: str = "random",
    threads: int = 1,
    anneal: AnnealParams | None = None,
    balance_params: AnnealParams | None = None,
) -> MethodComparison:
    """Paired MBC-vs-CIGR comparison on identical reviews and assignments."""
    if replicates < 2:
        raise ValueError("paired comparison needs at least 2 replicates")
    tasks = [
        (rep, p, METHODS, (mode,), rep, anneal, balance_params)
        for rep in range(replicates)
    ]
    results = _run_tasks(tasks, threads)
    mbc_ci = np.array([results[rep][("mbc", mode)].truth_ci for rep in range(replicates)])
    cigr_ci = np.array([results[rep][("cigr", mode)].truth_ci for rep in range(replicates)])
    return MethodComparison(
        params=p,
        mode=mode,
        mean_mbc=float(mbc_ci.mean()),
        mean_cigr=float(cigr_ci.mean()),
        mean_diff=float((cigr_ci - mbc_ci).mean()),
        p_value=paired_pvalue(cigr_ci, mbc_ci),
        n_reps=replicates,
    )


def balanced_comparison(
    p: SimParams,
    er_grid: Sequence[float],
    replicates: int = 1000,
    threads: int = 1,
    anneal: AnnealParams | None = None,
    balance_params: AnnealParams | None = None,
    confidence: float = 0.999,
) -> tuple[list[SweepRow], list[BalanceEffect]]:
    """Both methods under both assignment modes across an error grid.

    Returns sweep-style rows for all four arms plus the paired
    balanced-minus-random effect per method and error level.
    """
    tasks = []
    for vi, er in enumerate(er_grid):
        pv = replace(p, er_df=float(er))
        for rep in range(replicates):
            tasks.append(((vi, rep), pv, METHODS, MODES, rep, anneal, balance_params))
    results = _run_tasks(tasks, threads)

    rows: list[SweepRow] = []
    effects: list[BalanceEffect] = []
    for vi, er in enumerate(er_grid):
        per_arm = {
            (method, mode): [
                results[(vi, rep)][(method, mode)] for rep in range(replicates)
            ]
            for method in METHODS
            for mode in MODES
        }
        for method in METHODS:
            for mode in MODES:
                ci = np.array([r.truth_ci for r in per_arm[(method, mode)]])
                t02 = np.array(
                    [r.top_fraction_accuracy for r in per_arm[(method, mode)]]
                )
                rows.append(
                    SweepRow(
                        param="er_df",
                        value=float(er),
                        method=method,
                        mode=mode,
                        mean_ci=float(ci.mean()),
                        ci_hw=_halfwidth(ci, confidence),
                        mean_t02=float(t02.mean()),
                        t02_hw=_halfwidth(t02, confidence),
                        n_reps=replicates,
                    )
                )
            balanced_ci = [r.truth_ci for r in per_arm[(method, "balanced")]]
            random_ci = [r.truth_ci for r in per_arm[(method, "random")]]
            effects.append(
                BalanceEffect(
                    method=method,
                    er_df=float(er),
                    mean_gain=float(np.mean(balanced_ci) - np.mean(random_ci)),
                    p_value=paired_pvalue(balanced_ci, random_ci),
                    n_reps=replicates,
                )
            )
    return rows, effects


def boundary_from_diffs(
    sd_values: Sequence[float],
    er_values: Sequence[float],
    diffs: np.ndarray,
    confidence: float = 0.99,
) -> BoundaryResult:
    """Crossing points and fitted line from a (cigr - mbc) difference grid.

    For each score spread the first adjacent pair of error levels where the
    difference changes sign from non-negative to negative yields a linearly
    interpolated crossing; spreads without such a flip are censored.  An
    ordinary least-squares line is fitted through the uncensored crossings.
    """
    diffs = np.asarray(diffs, dtype=np.float64)
    if diffs.shape != (len(sd_values), len(er_values)):
        raise ValueError("difference grid shape does not match the axes")
    points: list[BoundaryPoint] = []
    for si, sd in enumerate(sd_values):
        row = diffs[si]
        cross = None
        for k in range(len(er_values) - 1):
            d1, d2 = row[k], row[k + 1]
            if d1 >= 0.0 > d2:
                e1, e2 = er_values[k], er_values[k + 1]
                cross = float(e1 + (e2 - e1) * d1 / (d1 - d2))
                break
        points.append(BoundaryPoint(sd_s=float(sd), er_cross=cross))

    usable = [(pt.sd_s, pt.er_cross) for pt in points if pt.er_cross is not None]
    fit = None
    if len(usable) >= 3:
        xs = np.array([u[0] for u in usable])
        ys = np.array([u[1] for u in usable])
        reg = stats.linregress(xs, ys)
        tq = float(stats.t.ppf(1.0 - (1.0 - confidence) / 2.0, len(usable) - 2))
        fit = BoundaryFit(
            slope=float(reg.slope),
            intercept=float(reg.intercept),
            slope_se=float(reg.stderr),
            slope_ci_low=float(reg.slope - tq * reg.stderr),
            slope_ci_high=float(reg.slope + tq * reg.stderr),
            confidence=confidence,
            n_points=len(usable),
        )
    return BoundaryResult(points=tuple(points), fit=fit)


def boundary(
    sd_grid: Sequence[float],
    er_grid: Sequence[float],
    base: SimParams,
    replicates: int = 100,
    threads: int = 1,
    anneal: AnnealParams | None = None,
    confidence: float = 0.99,
) -> BoundaryResult:
    """Locate the method-superiority boundary on the score-spread / error plane."""
    if not sd_grid or not er_grid:
        raise ValueError("boundary grids must be non-empty")
    tasks = []
    for si, sd in enumerate(sd_grid):
        for ei, er in enumerate(er_grid):
            pv = replace(base, sd_s=float(sd), er_df=float(er))
            for rep in range(replicates):
                tasks.append(((si, ei, rep), pv, METHODS, ("random",), rep, anneal, None))
    results = _run_tasks(tasks, threads)
    diffs = np.zeros((len(sd_grid), len(er_grid)))
    for si in range(len(sd_grid)):
        for ei in range(len(er_grid)):
            d = [
                results[(si, ei, rep)][("cigr", "random")].truth_ci
                - results[(si, ei, rep)][("mbc", "random")].truth_ci
                for rep in range(replicates)
            ]
            diffs[si, ei] = float(np.mean(d))
    return boundary_from_diffs(sd_grid, er_grid, diffs, confidence)


def _split_load(n_r: int, stages: int) -> list[int]:
    """Split the review budget across stages, larger loads first."""
    base, rem = divmod(n_r, stages)
    loads = [base + 1] * rem + [base] * (stages - rem)
    if loads[-1] < 2:
        raise ValueError(
            f"cannot split {n_r} reviews into {stages} stages of at least 2 each"
        )
    return loads


def _round_half_up(x: float) -> int:
    return int(np.floor(x + 0.5))


def _banded_assignment(
    ranked_survivors: Sequence[int],
    n_reviewers: int,
    m: int,
    band_width: int,
    rng: np.random.Generator,
) -> list[list[int]]:
    """Review sets drawn from contiguous rank bands of the survivor list.

    Reviewers are dealt to bands in proportion to band size, jittered by one
    band, and greedily pick the least-reviewed proposals of their band
    (excluding their own), keeping per-proposal review counts near-uniform.
    """
    survivors = list(ranked_survivors)
    bands = [survivors[k : k + band_width] for k in range(0, len(survivors), band_width)]
    if len(bands) > 1 and len(bands[-1]) < band_width:
        bands[-2].extend(bands.pop())
    n_b = len(bands)

    # largest-remainder allocation of reviewers to bands, by band size
    quotas = [len(b) * n_reviewers / len(survivors) for b in bands]
    counts = [int(q) for q in quotas]
    remainders = sorted(
        range(n_b), key=lambda b: (quotas[b] - counts[b], -b), reverse=True
    )
    shortfall = n_reviewers - sum(counts)
    for b in remainders[:shortfall]:
        counts[b] += 1

    order = [int(x) for x in rng.permutation(n_reviewers)]
    home: dict[int, int] = {}
    cursor = 0
    for b, c in enumerate(counts):
        for reviewer in order[cursor : cursor + c]:
            home[reviewer] = b
        cursor += c

    review_load = np.zeros(max(survivors) + 1, dtype=np.int64)
    reviews: list[list[int]] = [[] for _ in range(n_reviewers)]
    for reviewer in range(n_reviewers):
        band = home[reviewer]
        jitter = int(rng.integers(3)) - 1  # -1, 0, +1 band
        band = min(max(band + jitter, 0), n_b - 1)
        candidates = [p for p in bands[band] if p != reviewer]
        keys = rng.random(len(candidates))
        tagged = sorted(
            (int(review_load[p]), keys[idx], p) for idx, p in enumerate(candidates)
        )
        chosen = [p for _, _, p in tagged[:m]]
        for p in chosen:
            review_load[p] += 1
        reviews[reviewer] = sorted(chosen)
    return reviews


def multistage(
    p: SimParams,
    stages: int = 2,
    cut_fraction: float = 0.5,
    band_width: int = 10,
    replicate: int = 0,
    anneal: AnnealParams | None = None,
) -> MetricReport:
    """Multi-stage review: rank, cut the bottom, re-review in rank bands.

    The review budget ``n_r`` is split across stages.  Stage one runs the
    standard pipeline with the annealing search; every later stage drops the
    bottom ``cut_fraction`` of the current ranking (their applicants keep
    reviewing), groups survivors into contiguous rank bands of
    ``band_width``, reassigns reviews within bands, and re-ranks.

    Returns metrics with concordance taken against the truth restricted to
    the survivors and the top-slice accuracy against the full truth.
    """
    if stages < 2:
        raise ValueError(f"multistage needs at least 2 stages, got {stages}")
    if not 0.0 <= cut_fraction < 1.0:
        raise ValueError(f"cut_fraction must lie in [0, 1), got {cut_fraction}")
    if band_width < p.n_r:
        raise ValueError(
            f"band_width {band_width} cannot fill review sets of up to {p.n_r}"
        )
    loads = _split_load(p.n_r, stages)

    # shared draws for the whole multi-stage replicate
    truth = sample_true_scores(p.n_p, p.sd_s, stream(p.seed, replicate, SCORES_STREAM))
    profiles = sample_reviewers(
        p.n_p, p.br_sd, p.er_df, stream(p.seed, replicate, PROFILES_STREAM)
    )
    reference = true_ranking(truth)
    algo_seed = stream_seed(p.seed, replicate, ALGORITHM_STREAM)

    assignment = random_assignment(
        p.n_p, loads[0], seed=stream_seed(p.seed, replicate, ASSIGNMENT_STREAM)
    )
    partials = simulate_reviews(
        truth, profiles, assignment, stream(p.seed, replicate, REVIEWS_STREAM)
    )
    ranking = aggregate_ranking(
        partials, p.n_p, loads[0], "cigr", seed=algo_seed, anneal=anneal
    )
    survivors = [int(x) for x in ranking]
    local_partials = list(partials)

    for stage in range(1, stages):
        keep = len(survivors) - _round_half_up(cut_fraction * len(survivors))
        keep = max(keep, 2)
        survivors = survivors[:keep]

        m = loads[stage]
        role = _STAGE_ROLE_STRIDE * stage
        band_rng = stream(p.seed, replicate, ASSIGNMENT_STREAM + role)
        reviews = _banded_assignment(survivors, p.n_p, m, band_width, band_rng)
        partials = simulate_reviews(
            truth, profiles, reviews, stream(p.seed, replicate, REVIEWS_STREAM + role)
        )

        # compact survivor ids for the ranking search
        ordered_ids = sorted(survivors)
        to_local = {pid: k for k, pid in enumerate(ordered_ids)}
        from_local = {k: pid for pid, k in to_local.items()}
        local_partials = [
            PartialRanking(
                pr.reviewer,
                tuple(tuple(to_local[x] for x in g) for g in pr.groups),
            )
            for pr in partials
            if pr.size >= 2
        ]
        stage_seed = stream_seed(p.seed, replicate, ALGORITHM_STREAM + role)
        params = replace(anneal or EXPERIMENT_ANNEAL, seed=stage_seed)
        local_ranking = cigr_search(local_partials, len(ordered_ids), params).ranking
        survivors = [from_local[int(x)] for x in local_ranking]

    surv_set = set(survivors)
    truth_restricted = [int(x) for x in reference if int(x) in surv_set]
    to_local = {pid: k for k, pid in enumerate(sorted(surv_set))}
    inferred_local = [to_local[pid] for pid in survivors]
    truth_local = [to_local[pid] for pid in truth_restricted]

    k = max(1, _round_half_up(TOP_FRACTION * p.n_p))
    true_top = set(int(x) for x in reference[:k])
    hit = len(set(survivors[:k]) & true_top)

    return MetricReport(
        fit_ci=fit_concordance(inferred_local, local_partials),
        truth_ci=truth_concordance(inferred_local, truth_local),
        top_fraction_accuracy=hit / k,
    )


def _multistage_task(args) -> tuple[int, MetricReport, MetricReport]:
    p, stages, cut_fraction, band_width, rep, anneal = args
    multi = multistage(p, stages, cut_fraction, band_width, rep, anneal)
    single = run_replicate(p, "cigr", "random", rep, anneal)
    return rep, multi, single


@dataclass(frozen=True)
class MultistageStudy:
    """Paired multi-stage vs single-stage outcome over many replicates."""

    mean_multi_t02: float
    mean_single_t02: float
    mean_diff_t02: float
    p_value_t02: float
    mean_multi_ci: float
    mean_single_ci: float
    n_reps: int


def multistage_study(
    p: SimParams,
    stages: int = 2,
    cut_fraction: float = 0.5,
    band_width: int = 10,
    replicates: int = 100,
    threads: int = 1,
    anneal: AnnealParams | None = None,
) -> MultistageStudy:
    """Compare the multi-stage strategy against one standard full-budget stage.

    Both arms share truth and reviewer profiles per replicate; the top-slice
    accuracy of the multi-stage arm is measured against the full truth, so
    the arms are directly comparable.
    """
    tasks = [
        (p, stages, cut_fraction, band_width, rep, anneal) for rep in range(replicates)
    ]
    out: dict[int, tuple[MetricReport, MetricReport]] = {}
    if threads <= 1 or len(tasks) <= 1:
        for task in tasks:
            rep, multi, single = _multistage_task(task)
            out[rep] = (multi, single)
    else:
        chunk = max(1, len(tasks) // (threads * 8))
        with ProcessPoolExecutor(max_workers=threads) as pool:
            for rep, multi, single in pool.map(_multistage_task, tasks, chunksize=chunk):
                out[rep] = (multi, single)
    multi_t02 = [out[rep][0].top_fraction_accuracy for rep in range(replicates)]
    single_t02 = [out[rep][1].top_fraction_accuracy for rep in range(replicates)]
    return MultistageStudy(
        mean_multi_t02=float(np.mean(multi_t02)),
        mean_single_t02=float(np.mean(single_t02)),
        mean_diff_t02=float(np.mean(multi_t02) - np.mean(single_t02)),
        p_value_t02=paired_pvalue(multi_t02, single_t02),
        mean_multi_ci=float(np.mean([out[rep][0].truth_ci for rep in range(replicates)])),
        mean_single_ci=float(np.mean([out[rep][1].truth_ci for rep in range(replicates)])),
        n_reps=replicates,
    )
