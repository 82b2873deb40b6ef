"""Detail-subband recovery for the four shift cases."""

from .cases import (
    Case4Plan,
    DetailEstimate,
    MEMORY_BUDGET_BYTES,
    case4_plan,
    extrapolate_boundary,
    identifiable,
    observation_residuals,
    solve,
    solve_case1,
    solve_case23,
    solve_case4,
    solve_frame,
    solve_frame_sparse,
    stacked_system,
)
from .tsvd import TruncatedPinv, TsvdConfig, factor, gap_ratios, select_rank, tsvd_solve

__all__ = [
    "Case4Plan",
    "DetailEstimate",
    "MEMORY_BUDGET_BYTES",
    "TruncatedPinv",
    "TsvdConfig",
    "case4_plan",
    "extrapolate_boundary",
    "factor",
    "gap_ratios",
    "identifiable",
    "observation_residuals",
    "select_rank",
    "solve",
    "solve_case1",
    "solve_case23",
    "solve_case4",
    "solve_frame",
    "solve_frame_sparse",
    "stacked_system",
    "tsvd_solve",
]
