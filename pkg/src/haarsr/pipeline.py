"""Block-wise reconstruction of a full frame.

The frame is covered by equal-sized overlapping tiles and each tile is
solved with square shift operators.  A tile's border observations also
depend on subband values in the one-pixel ring around it, so before the
tile solve that ring's contribution is subtracted from the tile's
observations.  The ring values come from one frame-level solve
(:func:`haarsr.solver.solve_frame`); with ``coupling="independent"`` only
the known approximation ring is used and detail values outside each tile
are taken as zero.

Tile estimates are blended with linear ramps across overlaps; the
normalized weights sum to one at every pixel.
"""

from __future__ import annotations

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from threadpoolctl import threadpool_limits

from .errors import BlockTooLargeError, DataError, DimensionError, SolverError
from .haar import HaarPyramid1, as_plane, synthesize
from .imaging import Case, ObservationSet, classify_case
from .shiftop import build_operators, inband_shift, shift_direction
from .solver import (
    MEMORY_BUDGET_BYTES,
    DetailEstimate,
    TsvdConfig,
    case4_plan,
    extrapolate_boundary,
    observation_residuals,
    solve_case1,
    solve_case23,
    solve_frame,
)

log = logging.getLogger(__name__)

# Tiles handed to one worker call; fixed so results do not depend on the
# worker count.
CHUNK = 8
COUPLINGS = ("frame", "independent")


@dataclass(frozen=True)
class BlockGrid:
    block_size: int = 32
    overlap: int = 8
    tiles: tuple[tuple[int, int, int, int], ...] = ()
    frame: tuple[int, int] = (0, 0)


def _axis_starts(size: int, block: int, overlap: int) -> tuple[list[int], int]:
    if size <= block:
        return [0], size
    stride = block - overlap
    starts = list(range(0, size - block, stride))
    starts.append(size - block)
    return starts, block


def make_grid(m: int, n: int, block_size: int = 32, overlap: int = 8) -> BlockGrid:
    """Tile an ``m x n`` LR frame.

    All tiles have the same size; the last tile on each axis is aligned
    with the frame edge and may overlap its neighbour by more than
    ``overlap``.  A frame smaller than the block gets a single tile along
    that axis.
    """
    if block_size < 4 or block_size % 2:
        raise DataError(f"block size must be even and at least 4, got {block_size}")
    if not 0 <= overlap < block_size:
        raise DataError(f"overlap must be in [0, block size), got {overlap}")
    if m < 2 or n < 2:
        raise DimensionError(f"frame {m}x{n} is too small to tile")
    rows, th = _axis_starts(m, block_size, overlap)
    cols, tw = _axis_starts(n, block_size, overlap)
    tiles = tuple((r, c, th, tw) for r in rows for c in cols)
    return BlockGrid(block_size, overlap, tiles, (m, n))


def _ramp(start: int, length: int, size: int, overlap: int) -> np.ndarray:
    # Distance to the nearest tile edge that lies inside the frame.
    idx = np.arange(length, dtype=np.float64)
    dist = np.full(length, np.inf)
    if start > 0:
        dist = np.minimum(dist, idx)
    if start + length < size:
        dist = np.minimum(dist, length - 1 - idx)
    return np.minimum(1.0, (dist + 1.0) / (overlap + 1.0))


def blend_weights(grid: BlockGrid) -> list[np.ndarray]:
    """Per-tile weights, normalized so they sum to one at every LR pixel."""
    m, n = grid.frame
    raw = []
    total = np.zeros((m, n))
    for r0, c0, h, w in grid.tiles:
        wt = np.outer(_ramp(r0, h, m, grid.overlap), _ramp(c0, w, n, grid.overlap))
        raw.append(wt)
        total[r0 : r0 + h, c0 : c0 + w] += wt
    return [wt / total[r0 : r0 + h, c0 : c0 + w] for wt, (r0, c0, h, w) in zip(raw, grid.tiles)]


# -- run report -----------------------------------------------------------------

@dataclass
class TileReport:
    row0: int
    col0: int
    rows: int
    cols: int
    case: str = ""
    rank_used: dict = field(default_factory=dict)
    residuals: tuple = ()
    seconds: float = 0.0
    failed: bool = False
    error: str = ""


@dataclass
class RunReport:
    config: dict = field(default_factory=dict)
    tiles: list[TileReport] = field(default_factory=list)
    frame_seconds: float = 0.0
    wall_time_s: float = 0.0
    metrics: dict = field(default_factory=dict)

    @property
    def failed_tiles(self) -> list[int]:
        return [i for i, t in enumerate(self.tiles) if t.failed]

    def to_text(self) -> str:
        lines = ["# run report"]
        lines += [f"config.{k}={v}" for k, v in self.config.items()]
        lines += [f"metrics.{k}={v}" for k, v in self.metrics.items()]
        lines.append(f"frame_solve_s={self.frame_seconds:.3f}")
        lines.append(f"wall_time_s={self.wall_time_s:.3f}")
        lines.append(f"failed_tiles={len(self.failed_tiles)}")
        lines.append("tile,row0,col0,rows,cols,case,rank_used,max_residual,seconds,status")
        for i, t in enumerate(self.tiles):
            ranks = ";".join(f"{k}:{v}" for k, v in t.rank_used.items()) or "-"
            res = f"{max(t.residuals):.3e}" if t.residuals else "-"
            status = f"failed: {t.error}" if t.failed else "ok"
            lines.append(
                f"{i},{t.row0},{t.col0},{t.rows},{t.cols},{t.case},{ranks},{res},{t.seconds:.4f},{status}"
            )
        return "\n".join(lines) + "\n"


# -- tile solves ----------------------------------------------------------------

def _halo(padded: Sequence[np.ndarray], tile, shifts, ops_ext) -> list[np.ndarray]:
    """Contribution of the ring around ``tile`` to each observation.

    ``padded`` holds A, H, V, D padded by one zero ring, so rows
    ``r0 : r0+h+2`` of a padded band are the tile plus its ring.
    """
    r0, c0, h, w = tile
    ext = []
    for b in padded:
        blk = b[r0 : r0 + h + 2, c0 : c0 + w + 2].copy()
        blk[1:-1, 1:-1] = 0.0
        ext.append(blk)
    pyr = HaarPyramid1(*ext)
    return [inband_shift(pyr, ops, shift_direction(s))[1:-1, 1:-1] for s, ops in zip(shifts, ops_ext)]


class _TileSolver:
    def __init__(self, obs: ObservationSet, grid: BlockGrid, tsvd: TsvdConfig, memory_budget: int):
        self.obs = obs
        self.grid = grid
        self.tsvd = tsvd
        self.case = classify_case(obs)
        _, _, h, w = grid.tiles[0]
        self.ops_ext = [build_operators(s, h + 2, w + 2) for s in obs.shifts]
        self.plan = None
        self.plan_error = None
        if self.case == Case.CASE4:
            try:
                self.plan = case4_plan(tuple(obs.shifts), h, w, tsvd, memory_budget)
            except BlockTooLargeError:
                raise
            except SolverError as exc:
                # every tile shares the operators, so every tile fails
                self.plan_error = exc

    def tile_set(self, padded, k: int) -> ObservationSet:
        r0, c0, h, w = self.grid.tiles[k]
        sl = (slice(r0, r0 + h), slice(c0, c0 + w))
        halo = _halo(padded, self.grid.tiles[k], self.obs.shifts, self.ops_ext)
        shifted = tuple(o[sl] - b for o, b in zip(self.obs.shifted, halo))
        return ObservationSet(self.obs.reference[sl], shifted, self.obs.shifts)

    def solve_chunk(self, padded, ks: Sequence[int]):
        """``(estimate or None, seconds, error or None)`` per tile index."""
        if self.plan_error is not None:
            return [(None, 0.0, self.plan_error) for _ in ks]
        if self.plan is not None:
            t0 = time.perf_counter()
            sets = [self.tile_set(padded, k) for k in ks]
            refs = np.stack([s.reference for s in sets])
            observed = np.stack([np.stack(s.shifted) for s in sets], axis=1)
            H, V, D = self.plan.solve_many(refs, observed)
            out = []
            for i, sub in enumerate(sets):
                res = observation_residuals(sub, H[i], V[i], D[i])
                out.append(DetailEstimate(H[i], V[i], D[i], Case.CASE4, {"H": self.plan.rank}, res))
            per = (time.perf_counter() - t0) / len(ks)
            return [(est, per, None) for est in out]
        out = []
        for k in ks:
            t0 = time.perf_counter()
            sub = self.tile_set(padded, k)
            try:
                est = solve_case1(sub) if self.case == Case.CASE1 else solve_case23(sub, self.tsvd)
                out.append((est, time.perf_counter() - t0, None))
            except SolverError as exc:
                out.append((None, time.perf_counter() - t0, exc))
        return out


def reconstruct_details(
    obs: ObservationSet,
    grid: Optional[BlockGrid] = None,
    tsvd: TsvdConfig = TsvdConfig(),
    *,
    threads: int = 1,
    skip_failed_tiles: bool = False,
    extrapolate: bool = True,
    coupling: str = "frame",
    memory_budget: int = MEMORY_BUDGET_BYTES,
) -> tuple[HaarPyramid1, RunReport]:
    """Blended ``H``, ``V``, ``D`` for the whole frame plus a run report.

    ``extrapolate`` replaces the frame's last row and column, which the
    square operators leave untrusted; tile seams need no extrapolation
    because the ring correction supplies the missing neighbours.
    """
    start = time.perf_counter()
    m, n = obs.shape
    if grid is None:
        grid = make_grid(m, n)
    if grid.frame != (m, n):
        raise DimensionError(f"grid is for a {grid.frame} frame, observations are {m}x{n}")
    if coupling not in COUPLINGS:
        raise ValueError(f"coupling must be one of {COUPLINGS}, got {coupling!r}")
    report = RunReport(tiles=[TileReport(*t) for t in grid.tiles])
    weights = blend_weights(grid)
    chunks = [list(range(i, min(i + CHUNK, len(grid.tiles)))) for i in range(0, len(grid.tiles), CHUNK)]

    with threadpool_limits(limits=1):
        solver = _TileSolver(obs, grid, tsvd, memory_budget)
        ring = [np.zeros((m, n)) for _ in range(3)]
        if coupling == "frame" and len(grid.tiles) > 1:
            t0 = time.perf_counter()
            try:
                frame = solve_frame(obs, tsvd)
                ring = [frame.H, frame.V, frame.D]
            except SolverError as exc:
                if not skip_failed_tiles:
                    raise type(exc)(f"whole-frame coupling solve: {exc}") from exc
                log.warning("frame solve failed, tiles see zero detail rings: %s", exc)
            report.frame_seconds = time.perf_counter() - t0
        padded = [np.pad(b, 1) for b in [obs.reference] + ring]
        with ThreadPoolExecutor(max_workers=max(1, int(threads))) as pool:
            results = [r for chunk in pool.map(lambda ks: solver.solve_chunk(padded, ks), chunks) for r in chunk]

    bands = [np.zeros((m, n)) for _ in range(3)]
    for k, ((est, secs, err), wt, tile) in enumerate(zip(results, weights, grid.tiles)):
        info = report.tiles[k]
        info.seconds = secs
        info.case = solver.case.name
        r0, c0, h, w = tile
        if err is not None:
            if not skip_failed_tiles:
                raise type(err)(f"tile at LR ({r0}, {c0}): {err}") from err
            log.warning("tile at LR (%d, %d) failed, using zero details: %s", r0, c0, err)
            info.failed, info.error = True, str(err)
            continue
        info.rank_used, info.residuals = dict(est.rank_used), est.residuals
        for dst, src in zip(bands, (est.H, est.V, est.D)):
            dst[r0 : r0 + h, c0 : c0 + w] += wt * src

    est = DetailEstimate(*bands, solver.case)
    if extrapolate:
        est = extrapolate_boundary(est)
    report.wall_time_s = time.perf_counter() - start
    report.config.update(
        block_size=grid.block_size,
        overlap=grid.overlap,
        tiles=len(grid.tiles),
        case=solver.case.name,
        coupling=coupling,
        gap_ratio_min=tsvd.gap_ratio_min,
        max_rank=tsvd.max_rank,
        cost_probe=tsvd.cost_probe,
        threads=threads,
        extrapolate=extrapolate,
    )
    return est.pyramid(obs.reference), report


def reconstruct(
    obs: ObservationSet,
    grid: Optional[BlockGrid] = None,
    tsvd: TsvdConfig = TsvdConfig(),
    **kwargs,
) -> tuple[np.ndarray, RunReport]:
    """HR estimate (``2m x 2n``) from an observation set."""
    pyr, report = reconstruct_details(obs, grid, tsvd, **kwargs)
    return synthesize(pyr), report


# -- bicubic and colour -----------------------------------------------------------

def _cubic(d: np.ndarray, a: float = -0.5) -> np.ndarray:
    d = np.abs(d)
    return np.where(
        d <= 1,
        (a + 2) * d**3 - (a + 3) * d**2 + 1,
        np.where(d < 2, a * d**3 - 5 * a * d**2 + 8 * a * d - 4 * a, 0.0),
    )


def _upsample_axis0(x: np.ndarray) -> np.ndarray:
    # Output sample 2i+p sits at input coordinate i - 1/4 (p=0) or i + 1/4 (p=1).
    pad = np.pad(x, ((2, 2), (0, 0)), mode="edge")
    size = x.shape[0]
    out = np.empty((2 * size,) + x.shape[1:])
    for phase, offsets in ((0, (-2, -1, 0, 1)), (1, (-1, 0, 1, 2))):
        pos = -0.25 if phase == 0 else 0.25
        acc = np.zeros_like(x, dtype=np.float64)
        for off in offsets:
            acc += _cubic(np.array(pos - off)) * pad[2 + off : 2 + off + size]
        out[phase::2] = acc
    return out


def bicubic_upsample(img, factor: int = 2) -> np.ndarray:
    """x2 cubic-convolution interpolation (a = -0.5), edge samples replicated."""
    if factor != 2:
        raise ValueError("only factor 2 is supported")
    x = as_plane(img)
    return _upsample_axis0(_upsample_axis0(x).T).T


_YIQ = np.array(
    [
        [0.299, 0.587, 0.114],
        [0.595716, -0.274453, -0.321263],
        [0.211456, -0.522591, 0.311135],
    ]
)
_YIQ_INV = np.linalg.inv(_YIQ)


def rgb_to_yiq(rgb) -> np.ndarray:
    rgb = np.asarray(rgb, dtype=np.float64)
    if rgb.ndim != 3 or rgb.shape[2] != 3:
        raise DimensionError(f"expected an HxWx3 image, got shape {rgb.shape}")
    return rgb @ _YIQ.T


def yiq_to_rgb(yiq) -> np.ndarray:
    yiq = np.asarray(yiq, dtype=np.float64)
    if yiq.ndim != 3 or yiq.shape[2] != 3:
        raise DimensionError(f"expected an HxWx3 image, got shape {yiq.shape}")
    return yiq @ _YIQ_INV.T


@dataclass(frozen=True)
class ColorPolicy:
    mode: str = "luma_chroma"

    def __post_init__(self):
        if self.mode not in ("grayscale", "luma_chroma"):
            raise ValueError(f"unknown colour mode {self.mode!r}")


def reconstruct_color(
    luma: ObservationSet,
    chroma: Sequence[np.ndarray],
    policy: ColorPolicy = ColorPolicy(),
    grid: Optional[BlockGrid] = None,
    tsvd: TsvdConfig = TsvdConfig(),
    **kwargs,
) -> tuple[np.ndarray, RunReport]:
    """Reconstruct luma with the solver, upsample I and Q bicubically.

    ``chroma`` holds the reference frame's I and Q planes.  The returned
    RGB image is not clamped.
    """
    if policy.mode != "luma_chroma":
        raise DataError("colour reconstruction needs the luma_chroma policy")
    if len(chroma) != 2:
        raise DimensionError(f"expected I and Q planes, got {len(chroma)} chroma channel(s)")
    for c in chroma:
        if np.shape(c) != luma.shape:
            raise DimensionError(f"chroma plane {np.shape(c)} does not match luma {luma.shape}")
    y, report = reconstruct(luma, grid, tsvd, **kwargs)
    iq = [bicubic_upsample(c) for c in chroma]
    return yiq_to_rgb(np.stack([y] + iq, axis=-1)), report
