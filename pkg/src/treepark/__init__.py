"""treepark: parking on random rooted binary trees.

Simulation of the parking process on critical binomial Galton-Watson trees
and uniform random binary trees, together with the exact generating-function
analytics of the root flux, whose all-cars-park probability undergoes a
phase transition at arrival rate 2 - sqrt(2).

The Monte Carlo layer runs on a compiled Cython core when available and on
a bit-identical pure-Python fallback otherwise; ``backend_name()`` reports
which one is active.
"""

from ._backend import backend_name
from .analytics import (
    ALPHA_CRIT,
    BranchEval,
    CriticalQuantities,
    SpineStats,
    TruncatedPmf,
    branch_eval,
    c_upper,
    critical_quantities,
    mean_X,
    oracle_dist_X,
    pgf_X,
    phi_criterion,
    prob_all_park_limit,
    report,
    ruin_prob,
    s_switch,
    solve_p,
    spine_stats,
)
from .montecarlo import (
    Estimate,
    SpineSurvivalEstimate,
    YStatsEstimate,
    estimate_flux_pmf,
    estimate_parking_prob_finite,
    estimate_ruin_never_negative,
    estimate_spine_survival,
    estimate_y_stats,
)
from .parking import (
    Arrivals,
    CarRecord,
    FluxResult,
    compute_flux,
    count_line_parking_functions,
    is_line_parking_function,
    multinomial_arrivals,
    poisson_arrivals,
    simulate_sequential,
)
from .rng import Stream, derive_key
from .tree import (
    BinaryTree,
    SamplerConfig,
    SpineSegment,
    Truncated,
    build_spine_segment,
    enumerate_trees,
    sample_bgw_tree,
    sample_uniform_tree,
)

__all__ = [
    "ALPHA_CRIT",
    "Arrivals",
    "BinaryTree",
    "BranchEval",
    "CarRecord",
    "CriticalQuantities",
    "Estimate",
    "FluxResult",
    "SamplerConfig",
    "SpineSegment",
    "SpineStats",
    "SpineSurvivalEstimate",
    "Stream",
    "Truncated",
    "TruncatedPmf",
    "YStatsEstimate",
    "backend_name",
    "branch_eval",
    "build_spine_segment",
    "c_upper",
    "compute_flux",
    "count_line_parking_functions",
    "critical_quantities",
    "derive_key",
    "enumerate_trees",
    "estimate_flux_pmf",
    "estimate_parking_prob_finite",
    "estimate_ruin_never_negative",
    "estimate_spine_survival",
    "estimate_y_stats",
    "is_line_parking_function",
    "mean_X",
    "multinomial_arrivals",
    "oracle_dist_X",
    "pgf_X",
    "phi_criterion",
    "poisson_arrivals",
    "prob_all_park_limit",
    "report",
    "ruin_prob",
    "s_switch",
    "sample_bgw_tree",
    "sample_uniform_tree",
    "simulate_sequential",
    "solve_p",
    "spine_stats",
]
__version__ = "0.1.0"
