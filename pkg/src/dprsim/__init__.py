"""Distributed peer review: rank aggregation, balanced assignment, simulation.

Applicants to a program review each other's submissions; each submits a
partial ranking of a few proposals.  This package aggregates those partial
rankings into a global ranking (positional Borda scoring or an annealing
search maximizing pairwise concordance), generates and entropy-balances the
review assignments, and evaluates everything in a reproducible Monte Carlo
harness.
"""

from .assignment import (
    Assignment,
    Constraints,
    InfeasibleAssignmentError,
    NoTradeWarning,
    balance,
    entropy,
    max_entropy,
    pair_counts,
    random_assignment,
)
from .cigr import AnnealParams, CigrResult, cigr_search, cost_delta, exact_kemeny
from .experiments import (
    BalanceEffect,
    BoundaryFit,
    BoundaryPoint,
    BoundaryResult,
    MethodComparison,
    MultistageStudy,
    SweepRow,
    SweepSpec,
    balanced_comparison,
    boundary,
    boundary_from_diffs,
    compare_methods,
    multistage,
    multistage_study,
    paired_pvalue,
    run_replicate,
    run_replicates,
    sweep,
)
from .mbc import mbc_aggregate, mbc_over_rankings, mbc_rank, mbc_scores
from .rankings import (
    MetricReport,
    PartialRanking,
    UndefinedMetricError,
    build_rcm,
    cost,
    fit_concordance,
    top_fraction_accuracy,
    truth_concordance,
)
from .simulate import (
    ReviewerProfile,
    SimParams,
    sample_reviewers,
    sample_true_scores,
    simulate_reviews,
    true_ranking,
)

__version__ = "0.1.0"

__all__ = [
    "AnnealParams",
    "Assignment",
    "BalanceEffect",
    "BoundaryFit",
    "BoundaryPoint",
    "BoundaryResult",
    "CigrResult",
    "Constraints",
    "InfeasibleAssignmentError",
    "MethodComparison",
    "MetricReport",
    "MultistageStudy",
    "NoTradeWarning",
    "PartialRanking",
    "ReviewerProfile",
    "SimParams",
    "SweepRow",
    "SweepSpec",
    "UndefinedMetricError",
    "balance",
    "balanced_comparison",
    "boundary",
    "boundary_from_diffs",
    "build_rcm",
    "cigr_search",
    "compare_methods",
    "cost",
    "cost_delta",
    "entropy",
    "exact_kemeny",
    "fit_concordance",
    "max_entropy",
    "mbc_aggregate",
    "mbc_over_rankings",
    "mbc_rank",
    "mbc_scores",
    "multistage",
    "multistage_study",
    "paired_pvalue",
    "pair_counts",
    "random_assignment",
    "run_replicate",
    "run_replicates",
    "sample_reviewers",
    "sample_true_scores",
    "simulate_reviews",
    "sweep",
    "top_fraction_accuracy",
    "true_ranking",
    "truth_concordance",
]
