"""Command-line interface: simulation, assignment, aggregation, and studies.

Every command writes CSV results plus a ``meta.txt`` capturing the resolved
configuration, into the directory given by ``--out``.  Re-running a command
with the same seed reproduces every output byte for byte at any thread
count.
"""

from __future__ import annotations

import argparse
from dataclasses import replace
from pathlib import Path

import numpy as np

from .assignment import Constraints, balance, entropy, pair_counts, random_assignment
from .cigr import AnnealParams, cigr_search
from .experiments import (
    SimParams,
    SweepSpec,
    balanced_comparison,
    boundary,
    compare_methods,
    multistage_study,
    sweep,
)
from .mbc import mbc_rank, mbc_scores
from .rankings import PartialRanking
from .simulate import (
    ASSIGNMENT_STREAM,
    REVIEWS_STREAM,
    SCORES_STREAM,
    PROFILES_STREAM,
    sample_reviewers,
    sample_true_scores,
    simulate_reviews,
    stream,
    stream_seed,
    true_ranking,
)
from .textio import (
    format_assignment_csv,
    format_partials,
    format_ranking,
    parse_constraints,
    parse_partials,
    render_csv,
    render_meta,
    write_text,
)


def _add_sim_args(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--n-p", type=int, default=40, help="number of proposals / applicants")
    sp.add_argument("--n-r", type=int, default=7, help="reviews per proposal and per reviewer")
    sp.add_argument("--sd-s", type=float, default=20.0, help="spread of true scores")
    sp.add_argument("--br-sd", type=float, default=10.0, help="spread of reviewer bias")
    sp.add_argument("--er-df", type=float, default=10.0, help="reviewer error level (chi-squared df)")
    sp.add_argument("--seed", type=int, default=0, help="master seed")


def _add_run_args(sp: argparse.ArgumentParser, replicates: int) -> None:
    sp.add_argument("--replicates", type=int, default=replicates)
    sp.add_argument("--threads", type=int, default=1, help="parallel worker processes")
    sp.add_argument("--out", type=Path, required=True, help="output directory")


def _sim_params(args: argparse.Namespace) -> SimParams:
    return SimParams(
        n_p=args.n_p,
        n_r=args.n_r,
        sd_s=args.sd_s,
        br_sd=args.br_sd,
        er_df=args.er_df,
        seed=args.seed,
    )


def _grid(text: str) -> tuple[float, ...]:
    values = tuple(float(t) for t in text.split(",") if t.strip())
    if not values:
        raise argparse.ArgumentTypeError(f"empty grid {text!r}")
    return values


def _outdir(args: argparse.Namespace) -> Path:
    out: Path = args.out
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_meta(out: Path, args: argparse.Namespace) -> None:
    config = {
        k: v for k, v in vars(args).items() if k != "func" and not callable(v)
    }
    write_text(out / "meta.txt", render_meta(args.command, config))


def _cmd_simulate(args: argparse.Namespace) -> None:
    out = _outdir(args)
    p = _sim_params(args)
    rep = args.replicate
    truth = sample_true_scores(p.n_p, p.sd_s, stream(p.seed, rep, SCORES_STREAM))
    profiles = sample_reviewers(p.n_p, p.br_sd, p.er_df, stream(p.seed, rep, PROFILES_STREAM))
    assignment = random_assignment(
        p.n_p, p.n_r, seed=stream_seed(p.seed, rep, ASSIGNMENT_STREAM)
    )
    if args.balanced:
        assignment = balance(assignment, Constraints.self_review(p.n_p))
    partials = simulate_reviews(
        truth, profiles, assignment, stream(p.seed, rep, REVIEWS_STREAM)
    )
    write_text(out / "true_scores.csv", render_csv(
        ("proposal_id", "true_score"), [(i, float(s)) for i, s in enumerate(truth)]
    ))
    write_text(out / "truth_ranking.txt", format_ranking(true_ranking(truth)) + "\n")
    write_text(out / "partial_rankings.txt", format_partials(partials))
    _write_meta(out, args)


def _cmd_assign(args: argparse.Namespace) -> None:
    out = _outdir(args)
    if args.constraints:
        constraints = parse_constraints(Path(args.constraints).read_text(), args.n)
    else:
        constraints = Constraints.self_review(args.n)
    assignment = random_assignment(args.n, args.m, constraints, seed=args.seed)
    if args.balanced:
        assignment = balance(assignment, constraints, AnnealParams(seed=args.seed))
    write_text(out / "assignment.csv", format_assignment_csv(assignment))
    h = entropy(pair_counts(assignment, args.n), args.n, args.m)
    write_text(out / "entropy.txt", f"entropy={h:.10g}\n")
    _write_meta(out, args)


def _anneal_from_args(args: argparse.Namespace) -> AnnealParams:
    return AnnealParams(
        t0=args.t0,
        beta=args.beta,
        epsilon=args.epsilon,
        rho=args.rho,
        max_restarts=args.max_restarts,
        max_iters=args.max_iters,
        seed=args.anneal_seed,
    )


def _cmd_aggregate(args: argparse.Namespace) -> None:
    out = _outdir(args)
    partials = parse_partials(Path(args.input).read_text())
    if not partials:
        raise SystemExit("no partial rankings in input")
    n_p = args.n_p or 1 + max(p for pr in partials for p in pr.proposals())
    n_r = args.n_r or partials[0].size

    if args.method == "mbc":
        scores = mbc_scores(partials, n_r, n_p)
        ranking = mbc_rank(scores)
    else:
        result = cigr_search(
            partials, n_p, _anneal_from_args(args), warm_start=not args.random_start
        )
        ranking = result.ranking
        ballots = [
            PartialRanking.from_order(k, member)
            for k, member in enumerate(result.near_optimal_set)
        ]
        scores = mbc_scores(ballots, n_p, n_p)
        write_text(
            out / "run_info.txt",
            (
                f"best_cost={result.best_cost}\n"
                f"restarts={result.restarts_used}\n"
                f"iterations={result.iterations_used}\n"
                f"near_optimal_set_size={len(result.near_optimal_set)}\n"
            ),
        )

    position = np.empty(n_p, dtype=np.int64)
    position[ranking] = np.arange(n_p)
    rows = [(pid, float(scores[pid]), int(position[pid]) + 1) for pid in range(n_p)]
    write_text(out / "ranking.csv", render_csv(("proposal_id", "score", "rank"), rows))
    _write_meta(out, args)


def _cmd_sweep(args: argparse.Namespace) -> None:
    out = _outdir(args)
    spec = SweepSpec(
        param=args.param,
        grid=_grid(args.grid),
        base=_sim_params(args),
        methods=tuple(args.methods.split(",")),
        mode=args.mode,
        replicates=args.replicates,
        confidence=args.confidence,
    )
    rows = sweep(spec, threads=args.threads)
    write_text(out / "sweep.csv", render_csv(
        ("param", "value", "method", "mode", "mean_ci", "ci_hw", "mean_t02", "t02_hw", "n_reps"),
        [
            (r.param, r.value, r.method, r.mode, r.mean_ci, r.ci_hw, r.mean_t02, r.t02_hw, r.n_reps)
            for r in rows
        ],
    ))
    _write_meta(out, args)


def _cmd_compare(args: argparse.Namespace) -> None:
    out = _outdir(args)
    base = _sim_params(args)
    rows = []
    for er in _grid(args.er_grid):
        c = compare_methods(
            replace(base, er_df=float(er)),
            replicates=args.replicates,
            threads=args.threads,
        )
        rows.append((er, c.mode, c.mean_mbc, c.mean_cigr, c.mean_diff, c.p_value, c.n_reps))
    write_text(out / "compare.csv", render_csv(
        ("er_df", "mode", "mean_mbc", "mean_cigr", "mean_diff", "p_value", "n_reps"), rows
    ))
    _write_meta(out, args)


def _cmd_boundary(args: argparse.Namespace) -> None:
    out = _outdir(args)
    result = boundary(
        _grid(args.sd_grid),
        _grid(args.er_grid),
        _sim_params(args),
        replicates=args.replicates,
        threads=args.threads,
        confidence=args.confidence,
    )
    write_text(out / "boundary.csv", render_csv(
        ("sd_s", "er_cross", "censored"),
        [
            (pt.sd_s, pt.er_cross if pt.er_cross is not None else "", pt.censored)
            for pt in result.points
        ],
    ))
    fit_rows = []
    if result.fit:
        f = result.fit
        fit_rows.append(
            (f.slope, f.intercept, f.slope_se, f.slope_ci_low, f.slope_ci_high, f.confidence, f.n_points)
        )
    write_text(out / "boundary_fit.csv", render_csv(
        ("slope", "intercept", "slope_se", "slope_ci_low", "slope_ci_high", "confidence", "n_points"),
        fit_rows,
    ))
    _write_meta(out, args)


def _cmd_balanced_compare(args: argparse.Namespace) -> None:
    out = _outdir(args)
    rows, effects = balanced_comparison(
        _sim_params(args),
        _grid(args.er_grid),
        replicates=args.replicates,
        threads=args.threads,
    )
    write_text(out / "balanced.csv", render_csv(
        ("param", "value", "method", "mode", "mean_ci", "ci_hw", "mean_t02", "t02_hw", "n_reps"),
        [
            (r.param, r.value, r.method, r.mode, r.mean_ci, r.ci_hw, r.mean_t02, r.t02_hw, r.n_reps)
            for r in rows
        ],
    ))
    write_text(out / "balance_effects.csv", render_csv(
        ("method", "er_df", "mean_gain", "p_value", "n_reps"),
        [(e.method, e.er_df, e.mean_gain, e.p_value, e.n_reps) for e in effects],
    ))
    _write_meta(out, args)


def _cmd_multistage(args: argparse.Namespace) -> None:
    out = _outdir(args)
    study = multistage_study(
        _sim_params(args),
        stages=args.stages,
        cut_fraction=args.cut_fraction,
        band_width=args.band_width,
        replicates=args.replicates,
        threads=args.threads,
    )
    write_text(out / "multistage.csv", render_csv(
        (
            "stages", "cut_fraction", "band_width",
            "mean_multi_t02", "mean_single_t02", "mean_diff_t02", "p_value_t02",
            "mean_multi_ci", "mean_single_ci", "n_reps",
        ),
        [(
            args.stages, args.cut_fraction, args.band_width,
            study.mean_multi_t02, study.mean_single_t02, study.mean_diff_t02,
            study.p_value_t02, study.mean_multi_ci, study.mean_single_ci, study.n_reps,
        )],
    ))
    _write_meta(out, args)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dprsim",
        description="Distributed peer review: aggregation methods and Monte Carlo studies",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("simulate", help="emit one simulated review round")
    _add_sim_args(sp)
    sp.add_argument("--replicate", type=int, default=0, help="replicate index for the streams")
    sp.add_argument("--balanced", action="store_true", help="balance the assignment first")
    sp.add_argument("--out", type=Path, required=True)
    sp.set_defaults(func=_cmd_simulate)

    sp = sub.add_parser("assign", help="generate a review assignment")
    sp.add_argument("--n", type=int, required=True, help="number of reviewers/proposals")
    sp.add_argument("--m", type=int, required=True, help="reviews per reviewer")
    sp.add_argument("--balanced", action="store_true", help="entropy-balance the assignment")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--constraints", type=Path, default=None, help="constraints file")
    sp.add_argument("--out", type=Path, required=True)
    sp.set_defaults(func=_cmd_assign)

    sp = sub.add_parser("aggregate", help="aggregate partial rankings into a global ranking")
    sp.add_argument("--input", type=Path, required=True, help="partial rankings file")
    sp.add_argument("--method", choices=("mbc", "cigr"), default="mbc")
    sp.add_argument("--n-p", type=int, default=None, help="number of proposals (inferred if omitted)")
    sp.add_argument("--n-r", type=int, default=None, help="reviews per reviewer (inferred if omitted)")
    sp.add_argument("--t0", type=float, default=1.0, help="initial temperature")
    sp.add_argument("--beta", type=float, default=0.999, help="cooling factor")
    sp.add_argument("--epsilon", type=int, default=1, help="near-optimal cost slack")
    sp.add_argument("--rho", type=float, default=3.0, help="restart patience")
    sp.add_argument("--max-restarts", type=int, default=30)
    sp.add_argument("--max-iters", type=int, default=None)
    sp.add_argument("--anneal-seed", type=int, default=0)
    sp.add_argument("--random-start", action="store_true", help="start from a random permutation")
    sp.add_argument("--out", type=Path, required=True)
    sp.set_defaults(func=_cmd_aggregate)

    sp = sub.add_parser("sweep", help="sweep one simulation parameter")
    _add_sim_args(sp)
    sp.add_argument("--param", choices=("n_p", "n_r", "sd_s", "br_sd", "er_df"), required=True)
    sp.add_argument("--grid", type=str, required=True, help="comma-separated values")
    sp.add_argument("--methods", type=str, default="mbc")
    sp.add_argument("--mode", choices=("random", "balanced"), default="random")
    sp.add_argument("--confidence", type=float, default=0.999)
    _add_run_args(sp, replicates=1000)
    sp.set_defaults(func=_cmd_sweep)

    sp = sub.add_parser("compare", help="paired MBC vs CIGR comparison over an error grid")
    _add_sim_args(sp)
    sp.add_argument("--er-grid", type=str, default="5,10,15,20")
    _add_run_args(sp, replicates=200)
    sp.set_defaults(func=_cmd_compare)

    sp = sub.add_parser("boundary", help="method-superiority boundary on the sd_s/er plane")
    _add_sim_args(sp)
    sp.add_argument("--sd-grid", type=str, default="5,10,15,20,25,30")
    sp.add_argument("--er-grid", type=str, default="2,5,8,12,17,23,30")
    sp.add_argument("--confidence", type=float, default=0.99)
    _add_run_args(sp, replicates=100)
    sp.set_defaults(func=_cmd_boundary)

    sp = sub.add_parser("balanced-compare", help="balanced vs random assignment for both methods")
    _add_sim_args(sp)
    sp.add_argument("--er-grid", type=str, default="5,10,15,20")
    _add_run_args(sp, replicates=1000)
    sp.set_defaults(func=_cmd_balanced_compare)

    sp = sub.add_parser("multistage", help="multi-stage filtering strategy study")
    _add_sim_args(sp)
    sp.add_argument("--stages", type=int, default=2)
    sp.add_argument("--cut-fraction", type=float, default=0.5)
    sp.add_argument("--band-width", type=int, default=10)
    _add_run_args(sp, replicates=100)
    sp.set_defaults(func=_cmd_multistage)

    return parser


def main(argv: list[str] | None = None) -> None:
    args = build_parser().parse_args(argv)
    args.func(args)


if __name__ == "__main__":
    main()
