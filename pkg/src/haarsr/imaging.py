"""Synthetic observation sets: the imaging side of the reconstruction.

Motion is a translation per observation, blur and decimation together are
the level-1 Haar approximation (a 2x2 box mean), and noise is optional
additive white Gaussian.  Integer parts of the requested shifts are
removed by cropping every frame to the common region, which leaves each
observation a subpixel translate of the reference over that region.
Outside the region the scene is taken to be zero, which is the boundary
behaviour the square shift operators encode.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from .errors import DimensionError, GeometryError, UnsupportedConfigurationError
from .haar import analyze, as_plane
from .shiftop import DyadicShift, oracle_shift, quantize_shift


class Case(enum.IntEnum):
    """Admissible combinations of the three shift directions."""

    CASE1 = 1  # horizontal + vertical + diagonal
    CASE2 = 2  # horizontal + 2 diagonal
    CASE3 = 3  # vertical + 2 diagonal
    CASE4 = 4  # 3 diagonal


@dataclass(frozen=True)
class CropGeometry:
    """Common region in reference-LR pixel coordinates of the input frame."""

    top: int
    left: int
    height: int
    width: int
    source_height: int
    source_width: int


@dataclass(frozen=True)
class ObservationModel:
    motion: tuple[DyadicShift, ...]
    noise_sigma: float = 0.0

    def __post_init__(self):
        if not self.noise_sigma >= 0:
            raise ValueError("noise_sigma must be non-negative")


@dataclass
class ObservationSet:
    """Reference LR image plus three shifted LR images and their shifts."""

    reference: np.ndarray
    shifted: tuple[np.ndarray, ...]
    shifts: tuple[DyadicShift, ...]
    ground_truth: Optional[np.ndarray] = None
    crop: Optional[CropGeometry] = None
    integer_parts: tuple[tuple[int, int], ...] = ()
    residuals: tuple[tuple[float, float], ...] = ()
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.reference = as_plane(self.reference, "reference")
        self.shifted = tuple(as_plane(s, f"shifted[{i}]") for i, s in enumerate(self.shifted))
        self.shifts = tuple(self.shifts)
        if len(self.shifted) != 3 or len(self.shifts) != 3:
            raise UnsupportedConfigurationError("exactly three shifted observations are required")
        for i, img in enumerate(self.shifted):
            if img.shape != self.reference.shape:
                raise DimensionError(
                    f"shifted[{i}] is {img.shape}, reference is {self.reference.shape}"
                )
        if self.ground_truth is not None:
            gt = as_plane(self.ground_truth, "ground_truth")
            if gt.shape != (2 * self.shape[0], 2 * self.shape[1]):
                raise DimensionError("ground truth must be twice the LR size")
            self.ground_truth = gt

    @property
    def shape(self) -> tuple[int, int]:
        return self.reference.shape

    def block(self, r0: int, c0: int, rows: int, cols: int) -> "ObservationSet":
        """Sub-block of all four frames (shifts unchanged, no ground truth)."""
        sl = (slice(r0, r0 + rows), slice(c0, c0 + cols))
        return ObservationSet(
            reference=self.reference[sl],
            shifted=tuple(s[sl] for s in self.shifted),
            shifts=self.shifts,
        )

    def transposed(self) -> "ObservationSet":
        gt = None if self.ground_truth is None else self.ground_truth.T
        return ObservationSet(
            reference=self.reference.T,
            shifted=tuple(s.T for s in self.shifted),
            shifts=tuple(s.transposed() for s in self.shifts),
            ground_truth=gt,
        )


def classify_case(shifts: ObservationSet | Iterable[DyadicShift]) -> Case:
    if isinstance(shifts, ObservationSet):
        shifts = shifts.shifts
    shifts = tuple(shifts)
    kinds = [s.kind for s in shifts]
    if len(shifts) != 3:
        raise UnsupportedConfigurationError(f"need three shifts, got {len(shifts)}")
    zero = [s for s in shifts if s.kind == "none"]
    if zero:
        raise UnsupportedConfigurationError(f"shift(s) with no displacement: {zero}")
    n_h, n_v, n_d = kinds.count("horizontal"), kinds.count("vertical"), kinds.count("diagonal")
    if (n_h, n_v, n_d) == (1, 1, 1):
        return Case.CASE1
    if (n_h, n_v, n_d) == (1, 0, 2):
        return Case.CASE2
    if (n_h, n_v, n_d) == (0, 1, 2):
        return Case.CASE3
    if n_d == 3:
        return Case.CASE4
    offending = [s for s, k in zip(shifts, kinds) if k != "diagonal"]
    raise UnsupportedConfigurationError(
        f"{n_h} horizontal, {n_v} vertical, {n_d} diagonal shifts is not a solvable "
        f"combination; offending shifts: {offending}"
    )


def split_integer(d: float) -> tuple[int, float]:
    """Nearest-integer split ``d = p + f`` with ``|f| <= 1/2`` (ties keep ``p`` small)."""
    p = int(math.copysign(math.ceil(abs(d) - 0.5), d))
    return p, d - p


def _as_levels(ell) -> tuple[int, int]:
    if isinstance(ell, Sequence):
        return int(ell[0]), int(ell[1])
    return int(ell), int(ell)


def intersection(int_parts: Sequence[tuple[int, int]], height: int, width: int) -> CropGeometry:
    """Common region of the reference and frames displaced by ``int_parts``."""
    px = [0] + [p[0] for p in int_parts]
    py = [0] + [p[1] for p in int_parts]
    left, right = max(0, -min(px)), max(0, max(px))
    top, bottom = max(0, -min(py)), max(0, max(py))
    h, w = height - top - bottom, width - left - right
    if h < 2 or w < 2:
        raise GeometryError(
            f"integer shifts leave a {max(h, 0)}x{max(w, 0)} LR intersection; need at least 2x2"
        )
    return CropGeometry(top, left, h, w, height, width)


def degrade(
    hr,
    shifts: Sequence[tuple[float, float]],
    ell=4,
    noise_sigma: float = 0.0,
    seed: int = 0,
) -> ObservationSet:
    """Generate an observation set from an HR image.

    ``shifts`` are three ``(dx, dy)`` displacements in LR pixels and may
    include integer parts.
    """
    img = as_plane(hr, "hr")
    if img.shape[0] % 2 or img.shape[1] % 2:
        raise DimensionError(f"HR shape {img.shape} must be even in both axes")
    if len(shifts) != 3:
        raise UnsupportedConfigurationError("exactly three shifts are required")
    ell_x, ell_y = _as_levels(ell)
    if not noise_sigma >= 0:
        raise ValueError("noise_sigma must be non-negative")

    int_parts, fracs = [], []
    for dx, dy in shifts:
        px, fx = split_integer(float(dx))
        py, fy = split_integer(float(dy))
        int_parts.append((px, py))
        fracs.append((fx, fy))
    crop = intersection(int_parts, img.shape[0] // 2, img.shape[1] // 2)

    dyadic, residuals = [], []
    for fx, fy in fracs:
        s, res = quantize_shift(fx, fy, ell_x, ell_y)
        dyadic.append(s)
        residuals.append(res)
    classify_case(dyadic)
    if len(set(dyadic)) != 3:
        raise UnsupportedConfigurationError(f"quantized shifts are not pairwise distinct: {dyadic}")

    r0, c0 = 2 * crop.top, 2 * crop.left
    hr_crop = img[r0 : r0 + 2 * crop.height, c0 : c0 + 2 * crop.width]
    reference = analyze(hr_crop).A
    observed = [oracle_shift(hr_crop, s) for s in dyadic]

    if noise_sigma > 0:
        rng = np.random.default_rng(seed)
        reference = reference + rng.normal(0.0, noise_sigma, reference.shape)
        observed = [o + rng.normal(0.0, noise_sigma, o.shape) for o in observed]

    model = ObservationModel(motion=tuple(dyadic), noise_sigma=float(noise_sigma))
    return ObservationSet(
        reference=reference,
        shifted=tuple(observed),
        shifts=tuple(dyadic),
        ground_truth=hr_crop.copy(),
        crop=crop,
        integer_parts=tuple(int_parts),
        residuals=tuple(residuals),
        meta={"model": model, "noise_sigma": model.noise_sigma, "seed": int(seed)},
    )


def random_dyadic_shifts(
    rng: np.random.Generator,
    ell=4,
    accept: Optional[Callable[[tuple[DyadicShift, ...]], bool]] = None,
    max_tries: int = 10_000,
) -> tuple[DyadicShift, ...]:
    """Draw three dyadic shifts with steps uniform in ``[-2**ell, 2**ell]``.

    Draws are repeated until :func:`classify_case` accepts the triple and,
    if given, ``accept`` returns True.
    """
    ell_x, ell_y = _as_levels(ell)
    for _ in range(max_tries):
        triple = tuple(
            DyadicShift(
                int(rng.integers(-(2**ell_x), 2**ell_x + 1)),
                int(rng.integers(-(2**ell_y), 2**ell_y + 1)),
                ell_x,
                ell_y,
            )
            for _ in range(3)
        )
        if len(set(triple)) != 3:
            continue
        try:
            classify_case(triple)
        except UnsupportedConfigurationError:
            continue
        if accept is None or accept(triple):
            return triple
    raise GeometryError(f"no acceptable shift triple in {max_tries} draws")


# -- manifest ------------------------------------------------------------------

MANIFEST_NAME = "manifest.txt"


def manifest_dict(obs: ObservationSet, files: dict[str, str]) -> dict[str, str]:
    meta = obs.meta
    out: dict[str, str] = {
        "ell_x": str(obs.shifts[0].ell_x),
        "ell_y": str(obs.shifts[0].ell_y),
        "seed": str(meta.get("seed", 0)),
        "noise_sigma": repr(float(meta.get("noise_sigma", 0.0))),
        "case": str(int(classify_case(obs))),
    }
    for i, s in enumerate(obs.shifts, start=1):
        out[f"shift_{i}_x"] = repr(s.dx)
        out[f"shift_{i}_y"] = repr(s.dy)
        out[f"shift_{i}_sx"] = str(s.s_x)
        out[f"shift_{i}_sy"] = str(s.s_y)
        if obs.integer_parts:
            px, py = obs.integer_parts[i - 1]
            out[f"shift_{i}_int_x"] = str(px)
            out[f"shift_{i}_int_y"] = str(py)
        if obs.residuals:
            rx, ry = obs.residuals[i - 1]
            out[f"shift_{i}_residual_x"] = repr(rx)
            out[f"shift_{i}_residual_y"] = repr(ry)
    if obs.crop is not None:
        c = obs.crop
        out.update(
            crop_top=str(c.top),
            crop_left=str(c.left),
            crop_height=str(c.height),
            crop_width=str(c.width),
            crop_source_height=str(c.source_height),
            crop_source_width=str(c.source_width),
        )
    out.update(files)
    return out


def write_manifest(path: Path, entries: dict[str, str]) -> None:
    lines = [f"{k}={v}" for k, v in entries.items()]
    Path(path).write_text("\n".join(lines) + "\n")


def read_manifest(path: Path) -> dict[str, str]:
    entries: dict[str, str] = {}
    for n, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{n}: expected key=value, got {raw!r}")
        key, value = line.split("=", 1)
        entries[key.strip()] = value.strip()
    return entries


def shifts_from_manifest(entries: dict[str, str]) -> tuple[DyadicShift, ...]:
    ell_x, ell_y = int(entries["ell_x"]), int(entries["ell_y"])
    return tuple(
        DyadicShift(int(entries[f"shift_{i}_sx"]), int(entries[f"shift_{i}_sy"]), ell_x, ell_y)
        for i in (1, 2, 3)
    )
