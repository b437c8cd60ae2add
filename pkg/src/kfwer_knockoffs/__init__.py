"""Exact finite-sample k-FWER control in Gaussian linear regression via
knockoff variables, with baseline procedures and a Monte Carlo harness."""

__version__ = "0.1.0"

from .construct import (
    DesignMatrix,
    KnockoffAugment,
    augment_rows,
    construct_knockoffs,
    equicorrelated_s,
    normalize_columns,
    verify_identities,
)
from .error_rates import fdx_augment, pfer_budget_to_v, romano_wolf_fdx
from .lasso import EntryTimes, PathSpec, entry_times, entry_times_matrix, lasso_solve
from .selection import (
    Calibration,
    KnockoffStats,
    SelectionResult,
    chernoff_bound,
    choose_v,
    choose_v_randomized,
    compute_stats,
    nb_tail,
    select,
    select_by_threshold,
    top_up,
)

__all__ = [
    "DesignMatrix",
    "KnockoffAugment",
    "augment_rows",
    "construct_knockoffs",
    "equicorrelated_s",
    "normalize_columns",
    "verify_identities",
    "EntryTimes",
    "PathSpec",
    "entry_times",
    "entry_times_matrix",
    "lasso_solve",
    "Calibration",
    "KnockoffStats",
    "SelectionResult",
    "chernoff_bound",
    "choose_v",
    "choose_v_randomized",
    "compute_stats",
    "nb_tail",
    "select",
    "select_by_threshold",
    "top_up",
    "fdx_augment",
    "pfer_budget_to_v",
    "romano_wolf_fdx",
    "__version__",
]
