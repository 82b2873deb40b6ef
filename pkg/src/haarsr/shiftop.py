"""In-band subpixel shifts of a low-resolution image.

A shift is described at a hypothetical finer level: adding ``ell`` levels
of zero detail coefficients below the HR image upsamples it by ``2**ell``,
and an integer step ``s`` on that grid moves the LR image by
``s / 2**(ell+1)`` LR pixels.  The shifted LR image is then a bidiagonal
combination of the reference HR subbands::

    A_s = F_v A F_h + F_v H K_h + K_v V F_h + K_v D K_h

Sign convention (fixed by :func:`oracle_shift`): a positive ``s_x`` means
pixel ``j`` of the shifted image covers reference content at
``j + s_x / 2**(ell_x+1)``, i.e. it samples to the right; a positive
``s_y`` samples downward.  For positive shifts ``F_h``/``K_h`` carry the
sub-diagonal and ``F_v``/``K_v`` the super-diagonal; negative shifts move
the band to the opposite side.

The relation is exact against the spatial model only for
``|s| <= 2**ell`` (at most half an LR pixel).  Larger fractional steps
are still accepted by :func:`build_operators`, but callers should split
off the nearest integer first (see :mod:`haarsr.imaging`).

The operators are square, so the last row/column (positive shifts) or the
first row/column (negative shifts) of ``A_s`` assume the scene is zero
outside the frame.  Those border samples are untrusted for real data.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np
from scipy.linalg import solve_banded

from .errors import DimensionError, SingularOperatorError
from .haar import HaarPyramid1, as_plane

Direction = Literal["horizontal", "vertical", "diagonal"]


def _round_half_away(x: float) -> int:
    return int(np.sign(x) * np.floor(abs(x) + 0.5))


@dataclass(frozen=True)
class DyadicShift:
    """Shift of ``(s_x / 2**(ell_x+1), s_y / 2**(ell_y+1))`` LR pixels."""

    s_x: int
    s_y: int
    ell_x: int = 4
    ell_y: int = 4

    def __post_init__(self):
        for name in ("s_x", "s_y", "ell_x", "ell_y"):
            if int(getattr(self, name)) != getattr(self, name):
                raise ValueError(f"{name} must be an integer")
        if self.ell_x < 0 or self.ell_y < 0:
            raise ValueError("levels must be non-negative")
        if abs(self.s_x) >= self.steps_x or abs(self.s_y) >= self.steps_y:
            raise ValueError(
                f"shift ({self.s_x}, {self.s_y}) is not subpixel at levels "
                f"({self.ell_x}, {self.ell_y})"
            )

    @property
    def steps_x(self) -> int:
        return 2 ** (self.ell_x + 1)

    @property
    def steps_y(self) -> int:
        return 2 ** (self.ell_y + 1)

    @property
    def dx(self) -> float:
        return self.s_x / self.steps_x

    @property
    def dy(self) -> float:
        return self.s_y / self.steps_y

    @property
    def exact(self) -> bool:
        """True when the in-band model reproduces the spatial shift exactly."""
        return 2 * abs(self.s_x) <= self.steps_x and 2 * abs(self.s_y) <= self.steps_y

    @property
    def kind(self) -> str:
        if self.s_x and self.s_y:
            return "diagonal"
        if self.s_x:
            return "horizontal"
        if self.s_y:
            return "vertical"
        return "none"

    def transposed(self) -> "DyadicShift":
        return DyadicShift(self.s_y, self.s_x, self.ell_y, self.ell_x)


def quantize_shift(
    dx: float, dy: float, ell_x: int = 4, ell_y: int = 4
) -> tuple[DyadicShift, tuple[float, float]]:
    """Round a subpixel shift to the dyadic grid, per axis.

    Returns the shift and the residual ``requested - quantized`` per axis.
    """
    s_x = _round_half_away(dx * 2 ** (ell_x + 1))
    s_y = _round_half_away(dy * 2 ** (ell_y + 1))
    shift = DyadicShift(s_x, s_y, ell_x, ell_y)
    return shift, (dx - shift.dx, dy - shift.dy)


@dataclass(frozen=True)
class ShiftOperators:
    F_h: np.ndarray
    K_h: np.ndarray
    F_v: np.ndarray
    K_v: np.ndarray

    @property
    def shape(self) -> tuple[int, int]:
        return self.F_v.shape[0], self.F_h.shape[0]


def _bidiagonal(size: int, diag: float, off: float, lower: bool) -> np.ndarray:
    mat = np.diag(np.full(size, diag))
    k = -1 if lower else 1
    mat += np.diag(np.full(size - 1, off), k)
    return mat


def axis_operators(s: int, ell: int, size: int, right: bool) -> tuple[np.ndarray, np.ndarray]:
    """``(F, K)`` for one axis.

    ``right=True`` builds the right-multiplied (horizontal) pair, which
    carries the band below the diagonal for positive shifts; the
    left-multiplied (vertical) pair is its transpose.
    """
    steps = 2 ** (ell + 1)
    lower = (s >= 0) == right
    F = _bidiagonal(size, (steps - abs(s)) / steps, abs(s) / steps, lower)
    K = _bidiagonal(size, -s / steps, s / steps, lower)
    return F, K


def build_operators(shift: DyadicShift, m: int, n: int) -> ShiftOperators:
    if m < 2 or n < 2:
        raise DimensionError(f"operators need at least 2x2 subbands, got {m}x{n}")
    F_h, K_h = axis_operators(shift.s_x, shift.ell_x, n, right=True)
    F_v, K_v = axis_operators(shift.s_y, shift.ell_y, m, right=False)
    return ShiftOperators(F_h=F_h, K_h=K_h, F_v=F_v, K_v=K_v)


def _check_pyramid(pyr: HaarPyramid1, ops: ShiftOperators) -> None:
    if pyr.shape != ops.shape:
        raise DimensionError(f"subbands are {pyr.shape} but operators expect {ops.shape}")


def inband_shift(pyr: HaarPyramid1, ops: ShiftOperators, direction: Direction = "diagonal") -> np.ndarray:
    """Shifted LR image computed from the reference HR subbands."""
    _check_pyramid(pyr, ops)
    if direction == "horizontal":
        return pyr.A @ ops.F_h + pyr.H @ ops.K_h
    if direction == "vertical":
        return ops.F_v @ pyr.A + ops.K_v @ pyr.V
    if direction == "diagonal":
        return (
            ops.F_v @ pyr.A @ ops.F_h
            + ops.F_v @ pyr.H @ ops.K_h
            + ops.K_v @ pyr.V @ ops.F_h
            + ops.K_v @ pyr.D @ ops.K_h
        )
    raise ValueError(f"unknown direction {direction!r}")


def shift_direction(shift: DyadicShift) -> Direction:
    kind = shift.kind
    return "diagonal" if kind in ("diagonal", "none") else kind


def oracle_shift(hr, shift: DyadicShift) -> np.ndarray:
    """Brute-force spatial counterpart of :func:`inband_shift`.

    The HR image is upsampled by zero-detail Haar synthesis (which for Haar
    is sample replication) ``ell`` times per axis, translated by the integer
    step on that grid with zeros entering from outside the frame, and
    block-averaged back down to the LR grid.
    """
    img = as_plane(hr, "hr")
    if img.shape[0] % 2 or img.shape[1] % 2:
        raise DimensionError(f"HR shape {img.shape} must be even")
    up_y, up_x = 2**shift.ell_y, 2**shift.ell_x
    fine = np.repeat(np.repeat(img, up_y, axis=0), up_x, axis=1)
    moved = np.zeros_like(fine)
    sy, sx = shift.s_y, shift.s_x
    rows, cols = fine.shape
    dst_r = slice(max(0, -sy), rows - max(0, sy))
    src_r = slice(max(0, sy), rows - max(0, -sy))
    dst_c = slice(max(0, -sx), cols - max(0, sx))
    src_c = slice(max(0, sx), cols - max(0, -sx))
    moved[dst_r, dst_c] = fine[src_r, src_c]
    by, bx = 2 * up_y, 2 * up_x
    m, n = rows // by, cols // bx
    return moved.reshape(m, by, n, bx).mean(axis=(1, 3))


# -- bidiagonal solves -------------------------------------------------------

def _banded(mat: np.ndarray) -> tuple[tuple[int, int], np.ndarray]:
    diag = np.diag(mat)
    if np.any(diag == 0):
        raise SingularOperatorError("bidiagonal operator has a zero on its diagonal")
    sub = np.diag(mat, -1)
    sup = np.diag(mat, 1)
    if np.any(sup):
        ab = np.zeros((2, mat.shape[0]))
        ab[0, 1:] = sup
        ab[1] = diag
        return (0, 1), ab
    ab = np.zeros((2, mat.shape[0]))
    ab[0] = diag
    ab[1, :-1] = sub
    return (1, 0), ab


def solve_left(mat: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve ``mat @ X = rhs`` for a bidiagonal ``mat`` by substitution."""
    lu, ab = _banded(mat)
    return solve_banded(lu, ab, rhs, check_finite=False)


def solve_right(rhs: np.ndarray, mat: np.ndarray) -> np.ndarray:
    """Solve ``X @ mat = rhs`` for a bidiagonal ``mat`` by substitution."""
    lu, ab = _banded(mat.T)
    return solve_banded(lu, ab, rhs.T, check_finite=False).T
