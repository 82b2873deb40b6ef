"""PSNR, RMSE and SSIM for 8-bit-range images."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import correlate

from .errors import DimensionError

PEAK = 255.0
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
C1 = (0.01 * PEAK) ** 2
C2 = (0.03 * PEAK) ** 2

CSV_HEADER = ("image", "method", "psnr", "rmse", "ssim", "wall_time_s")


def _pair(a, b, border_exclude: int) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionError(f"image shapes differ: {a.shape} vs {b.shape}")
    if border_exclude < 0:
        raise ValueError("border_exclude must be non-negative")
    if border_exclude:
        k = border_exclude
        a, b = a[k:-k, k:-k], b[k:-k, k:-k]
    if a.size == 0:
        raise DimensionError("nothing left to compare after border exclusion")
    return a, b


def rmse(a, b, border_exclude: int = 0) -> float:
    a, b = _pair(a, b, border_exclude)
    return float(np.sqrt(np.mean((a - b) ** 2)))


def psnr_from_rmse(err: float) -> float:
    return math.inf if err == 0 else 20.0 * math.log10(PEAK / err)


def psnr(a, b, border_exclude: int = 0) -> float:
    """``20 log10(255 / rmse)``; ``inf`` for identical images."""
    return psnr_from_rmse(rmse(a, b, border_exclude))


def gaussian_window(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    x = np.arange(size) - (size - 1) / 2
    g = np.exp(-(x**2) / (2 * sigma**2))
    w = np.outer(g, g)
    return w / w.sum()


def ssim_map(a, b, border_exclude: int = 0) -> np.ndarray:
    """Local SSIM over every full window position (no padding)."""
    a, b = _pair(a, b, border_exclude)
    if min(a.shape) < SSIM_WINDOW:
        raise DimensionError(f"SSIM needs at least {SSIM_WINDOW}x{SSIM_WINDOW} pixels, got {a.shape}")
    w = gaussian_window()
    r = SSIM_WINDOW // 2
    crop = (slice(r, a.shape[0] - r), slice(r, a.shape[1] - r))

    def filt(x):
        return correlate(x, w, mode="constant")[crop]

    mu_a, mu_b = filt(a), filt(b)
    var_a = filt(a * a) - mu_a**2
    var_b = filt(b * b) - mu_b**2
    cov = filt(a * b) - mu_a * mu_b
    num = (2 * mu_a * mu_b + C1) * (2 * cov + C2)
    den = (mu_a**2 + mu_b**2 + C1) * (var_a + var_b + C2)
    return num / den


def ssim(a, b, border_exclude: int = 0) -> float:
    a_, b_ = _pair(a, b, border_exclude)
    if np.array_equal(a_, b_):
        return 1.0
    return float(np.mean(ssim_map(a_, b_)))


@dataclass(frozen=True)
class QualityReport:
    psnr: float
    rmse: float
    ssim: float
    border_exclude: int

    def csv_row(self, image: str, method: str, wall_time_s: float = 0.0) -> list[str]:
        return [image, method, f"{self.psnr:.4f}", f"{self.rmse:.6f}", f"{self.ssim:.6f}", f"{wall_time_s:.3f}"]


def evaluate(estimate, truth, border_exclude: int = 2) -> QualityReport:
    err = rmse(estimate, truth, border_exclude)
    return QualityReport(
        psnr=psnr_from_rmse(err),
        rmse=err,
        ssim=ssim(estimate, truth, border_exclude),
        border_exclude=border_exclude,
    )
