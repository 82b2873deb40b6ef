"""Truncated SVD with gap-based rank selection."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from ..errors import ZeroMatrixError

# Singular values at or below this fraction of the largest are numerically zero.
RELATIVE_FLOOR = 1e-12
# Absolute size under which a system matrix is treated as identically zero.
ABSOLUTE_FLOOR = 1e-12


@dataclass(frozen=True)
class TsvdConfig:
    max_rank: Union[int, str] = "full"
    gap_ratio_min: float = 10.0
    cost_probe: bool = False

    def __post_init__(self):
        if not self.gap_ratio_min > 1:
            raise ValueError("gap_ratio_min must exceed 1")
        if self.max_rank != "full" and (int(self.max_rank) != self.max_rank or self.max_rank < 1):
            raise ValueError("max_rank must be a positive integer or 'full'")


def gap_ratios(sigma: np.ndarray) -> np.ndarray:
    """``sigma[r] / sigma[r+1]`` for every ``r``, with the tail padded by the floor.

    Values below the floor are clamped to it, so the ratio after the last
    numerically nonzero singular value measures its distance from zero.
    """
    floor = RELATIVE_FLOOR * sigma[0]
    clamped = np.maximum(sigma, floor)
    following = np.append(clamped[1:], floor)
    return clamped / following


def select_rank(sigma: np.ndarray, cfg: TsvdConfig) -> int:
    """Largest index ``r`` (1-based) with ``sigma_r / sigma_{r+1} >= gap_ratio_min``.

    If no ratio meets the threshold the most pronounced gap is used, which
    keeps the chosen rank non-increasing in ``gap_ratio_min``.
    """
    ratios = gap_ratios(sigma)
    candidates = np.flatnonzero(ratios >= cfg.gap_ratio_min) + 1
    if candidates.size == 0:
        candidates = np.flatnonzero(ratios == ratios.max()) + 1
    if cfg.cost_probe and candidates.size > 1:
        costs = [_cost(sigma, r) for r in candidates]
        best = min(costs)
        rank = int(max(r for r, c in zip(candidates, costs) if c <= best * (1 + 1e-12)))
    else:
        rank = int(candidates.max())
    if cfg.max_rank != "full":
        rank = min(rank, int(cfg.max_rank))
    return rank


def _cost(sigma: np.ndarray, rank: int) -> float:
    # ||pinv(X_r) X - I||_F = ||V_r V_r^T - I||_F = sqrt(n - r) by unitary invariance.
    return math.sqrt(sigma.size - rank)


@dataclass(frozen=True)
class TruncatedPinv:
    """Rank-``r`` pseudo-inverse kept in factored form for repeated solves."""

    u: np.ndarray
    inv_sigma: np.ndarray
    vt: np.ndarray
    rank: int
    sigma: np.ndarray

    def apply(self, rhs: np.ndarray) -> np.ndarray:
        coef = self.u.T @ rhs
        coef *= self.inv_sigma[:, None] if coef.ndim == 2 else self.inv_sigma
        return self.vt.T @ coef


def factor(X: np.ndarray, cfg: TsvdConfig = TsvdConfig()) -> TruncatedPinv:
    X = np.asarray(X, dtype=np.float64)
    u, sigma, vt = np.linalg.svd(X, full_matrices=False)
    if sigma.size == 0 or sigma[0] <= ABSOLUTE_FLOOR:
        raise ZeroMatrixError("system matrix is numerically zero")
    rank = select_rank(sigma, cfg)
    return TruncatedPinv(
        u=u[:, :rank],
        inv_sigma=1.0 / sigma[:rank],
        vt=vt[:rank],
        rank=rank,
        sigma=sigma,
    )


def tsvd_solve(X, B, cfg: TsvdConfig = TsvdConfig()) -> tuple[np.ndarray, int]:
    """Solve ``X @ sol = B`` with a rank-truncated pseudo-inverse.

    Returns ``(solution, rank_used)``.
    """
    pinv = factor(X, cfg)
    B = np.asarray(B, dtype=np.float64)
    if B.shape[0] != pinv.u.shape[0]:
        raise ValueError(f"right-hand side has {B.shape[0]} rows, matrix has {pinv.u.shape[0]}")
    return pinv.apply(B), pinv.rank
