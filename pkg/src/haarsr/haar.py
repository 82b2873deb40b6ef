"""One-level 2D Haar analysis and synthesis.

Normalization is the block mean: for every 2x2 cell

    a b
    c d

the subbands are ``A = (a+b+c+d)/4``, ``H = (a-b+c-d)/4``,
``V = (a+b-c-d)/4`` and ``D = (a-b-c+d)/4``.  Under this scaling the
approximation subband is the box-downsampled low-resolution image, and
``H`` (``V``) carries the left-minus-right (top-minus-bottom) difference.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError


def as_plane(image, name: str = "image") -> np.ndarray:
    """Return ``image`` as a finite 2D float64 array (no copy if already one)."""
    arr = np.asarray(image, dtype=np.float64)
    if arr.ndim != 2:
        raise DimensionError(f"{name} must be 2D, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise DimensionError(f"{name} is empty")
    if not np.all(np.isfinite(arr)):
        raise DimensionError(f"{name} contains NaN or Inf")
    return arr


@dataclass(frozen=True)
class HaarPyramid1:
    """Approximation and detail subbands of one decomposition level."""

    A: np.ndarray
    H: np.ndarray
    V: np.ndarray
    D: np.ndarray

    def __post_init__(self):
        shapes = {np.shape(b) for b in (self.A, self.H, self.V, self.D)}
        if len(shapes) != 1:
            raise DimensionError(f"subband shapes differ: {sorted(shapes)}")
        if len(next(iter(shapes))) != 2:
            raise DimensionError("subbands must be 2D")

    @property
    def shape(self) -> tuple[int, int]:
        return self.A.shape

    def details(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return self.H, self.V, self.D


def analyze(image) -> HaarPyramid1:
    img = as_plane(image)
    rows, cols = img.shape
    if rows % 2:
        raise DimensionError(f"height {rows} is odd; Haar analysis needs even dimensions")
    if cols % 2:
        raise DimensionError(f"width {cols} is odd; Haar analysis needs even dimensions")
    a = img[0::2, 0::2]
    b = img[0::2, 1::2]
    c = img[1::2, 0::2]
    d = img[1::2, 1::2]
    return HaarPyramid1(
        A=(a + b + c + d) / 4.0,
        H=(a - b + c - d) / 4.0,
        V=(a + b - c - d) / 4.0,
        D=(a - b - c + d) / 4.0,
    )


def synthesize(pyr: HaarPyramid1) -> np.ndarray:
    """Invert :func:`analyze` exactly."""
    A, H, V, D = (np.asarray(x, dtype=np.float64) for x in (pyr.A, pyr.H, pyr.V, pyr.D))
    rows, cols = A.shape
    out = np.empty((2 * rows, 2 * cols))
    out[0::2, 0::2] = A + H + V + D
    out[0::2, 1::2] = A - H + V - D
    out[1::2, 0::2] = A + H - V - D
    out[1::2, 1::2] = A - H - V + D
    return out


def zero_detail(A) -> HaarPyramid1:
    A = as_plane(A, "approximation")
    z = np.zeros_like(A)
    return HaarPyramid1(A, z, z.copy(), z.copy())
