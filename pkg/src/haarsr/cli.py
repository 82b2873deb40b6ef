"""Command-line interface: degrade, reconstruct, evaluate, bench.

Exit codes: 0 success, 2 usage, 3 data or geometry problems, 4 solver
failures.
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import sys
import time
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .errors import DataError, SolverError
from .haar import analyze
from .imaging import (
    MANIFEST_NAME,
    ObservationSet,
    degrade,
    manifest_dict,
    random_dyadic_shifts,
    read_manifest,
    shifts_from_manifest,
    write_manifest,
)
from .metrics import CSV_HEADER, evaluate
from .netpbm import read_image, write_image, write_pfm
from .pipeline import (
    COUPLINGS,
    bicubic_upsample,
    make_grid,
    reconstruct,
    reconstruct_color,
    rgb_to_yiq,
    yiq_to_rgb,
)
from .solver import TsvdConfig, identifiable

log = logging.getLogger("haarsr")

EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_SOLVER = 4

DEFAULTS = {
    "block_size": 32,
    "overlap": 8,
    "ell": 4,
    "gap_ratio_min": 10.0,
    "max_rank": "full",
    "cost_probe": False,
    "seed": 0,
    "noise_sigma": 0.0,
    "border_exclude": 2,
    "threads": 1,
    "coupling": "frame",
    "bit_depth": 8,
}


class UsageError(Exception):
    pass


# -- argument helpers -------------------------------------------------------------

def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def _non_negative_int(text: str) -> int:
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"expected a non-negative integer, got {text}")
    return value


def _non_negative_float(text: str) -> float:
    value = float(text)
    if not value >= 0:
        raise argparse.ArgumentTypeError(f"expected a non-negative number, got {text}")
    return value


def _gap_ratio(text: str) -> float:
    value = float(text)
    if not value > 1:
        raise argparse.ArgumentTypeError(f"gap ratio must exceed 1, got {text}")
    return value


def _max_rank(text: str):
    return "full" if text == "full" else _positive_int(text)


def _bool(text: str) -> bool:
    low = str(text).lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {text}")


CONVERTERS = {
    "block_size": _positive_int,
    "overlap": _non_negative_int,
    "ell": _non_negative_int,
    "gap_ratio_min": _gap_ratio,
    "max_rank": _max_rank,
    "cost_probe": _bool,
    "seed": int,
    "noise_sigma": _non_negative_float,
    "border_exclude": _non_negative_int,
    "threads": _positive_int,
    "coupling": str,
    "bit_depth": int,
}


def resolve_config(args: argparse.Namespace) -> dict:
    """Flags override the ``--config`` file, which overrides defaults."""
    cfg = dict(DEFAULTS)
    if getattr(args, "config", None):
        try:
            entries = read_manifest(args.config)
        except OSError as exc:
            raise DataError(f"cannot read config file: {exc}") from exc
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
        for key, raw in entries.items():
            key = key.replace("-", "_")
            if key not in CONVERTERS:
                raise UsageError(f"unknown config key {key!r} in {args.config}")
            try:
                cfg[key] = CONVERTERS[key](raw)
            except (ValueError, argparse.ArgumentTypeError) as exc:
                raise UsageError(f"{args.config}: bad value for {key}: {exc}") from exc
    for key in DEFAULTS:
        value = getattr(args, key, None)
        if value is not None:
            cfg[key] = value
    if cfg["coupling"] not in COUPLINGS:
        raise UsageError(f"coupling must be one of {COUPLINGS}")
    if cfg["bit_depth"] not in (8, 16):
        raise UsageError("bit depth must be 8 or 16")
    if cfg["overlap"] >= cfg["block_size"]:
        raise UsageError("overlap must be smaller than the block size")
    return cfg


def _tsvd(cfg: dict) -> TsvdConfig:
    return TsvdConfig(max_rank=cfg["max_rank"], gap_ratio_min=cfg["gap_ratio_min"], cost_probe=cfg["cost_probe"])


def _luma(img: np.ndarray) -> np.ndarray:
    return rgb_to_yiq(img)[..., 0] if img.ndim == 3 else img


# -- degrade ----------------------------------------------------------------------

def _draw_shifts(cfg: dict, explicit) -> list[tuple[float, float]]:
    if explicit:
        if len(explicit) != 3:
            raise UsageError("give exactly three --shift DX DY pairs")
        return [tuple(map(float, s)) for s in explicit]
    rng = np.random.default_rng(cfg["seed"])
    # degenerate triples cannot be solved by any method, so they are redrawn
    return [(s.dx, s.dy) for s in random_dyadic_shifts(rng, cfg["ell"], accept=identifiable)]


def degrade_image(hr: np.ndarray, shifts, cfg: dict) -> tuple[ObservationSet, Optional[list[np.ndarray]]]:
    """Observation set for the luma of ``hr`` plus the LR I and Q planes for colour input."""
    obs = degrade(_luma(hr), shifts, ell=cfg["ell"], noise_sigma=cfg["noise_sigma"], seed=cfg["seed"])
    if hr.ndim != 3:
        return obs, None
    c = obs.crop
    crop = rgb_to_yiq(hr)[2 * c.top : 2 * (c.top + c.height), 2 * c.left : 2 * (c.left + c.width)]
    chroma = [analyze(crop[..., k]).A for k in (1, 2)]
    return obs, chroma


def cmd_degrade(args, cfg: dict) -> int:
    hr = read_image(args.hr)
    shifts = _draw_shifts(cfg, args.shift)
    obs, chroma = degrade_image(hr, shifts, cfg)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    # LR frames go to PFM: see haarsr.netpbm for why 8 or 16 bits are not enough.
    files = {"reference": "reference.pfm"}
    write_pfm(out / "reference.pfm", obs.reference)
    for i, img in enumerate(obs.shifted, start=1):
        files[f"shifted_{i}"] = f"shifted_{i}.pfm"
        write_pfm(out / files[f"shifted_{i}"], img)
    c = obs.crop
    if chroma is not None:
        rgb = yiq_to_rgb(np.stack([obs.reference] + chroma, axis=-1))
        files["reference_rgb"] = "reference_rgb.pfm"
        write_pfm(out / "reference_rgb.pfm", rgb)
        gt = hr[2 * c.top : 2 * (c.top + c.height), 2 * c.left : 2 * (c.left + c.width)]
        files["ground_truth"] = "ground_truth.ppm"
    else:
        gt = obs.ground_truth
        files["ground_truth"] = "ground_truth.pgm"
    write_image(out / files["ground_truth"], gt)
    entries = manifest_dict(obs, files)
    entries["source"] = Path(args.hr).name
    write_manifest(out / MANIFEST_NAME, entries)
    print(f"wrote case {entries['case']} observation set ({obs.shape[0]}x{obs.shape[1]} LR) to {out}")
    return 0


# -- reconstruct ------------------------------------------------------------------

def load_observations(source) -> tuple[ObservationSet, Optional[list[np.ndarray]], Optional[np.ndarray], dict]:
    """Observation set, LR chroma planes, ground truth and manifest from disk."""
    path = Path(source)
    manifest_path = path / MANIFEST_NAME if path.is_dir() else path
    entries = read_manifest(manifest_path)
    base = manifest_path.parent
    try:
        shifts = shifts_from_manifest(entries)
        reference = read_image(base / entries["reference"])
        shifted = tuple(read_image(base / entries[f"shifted_{i}"]) for i in (1, 2, 3))
    except KeyError as exc:
        raise DataError(f"{manifest_path}: missing key {exc}") from exc
    chroma = None
    if "reference_rgb" in entries:
        yiq = rgb_to_yiq(read_image(base / entries["reference_rgb"]))
        chroma = [yiq[..., 1], yiq[..., 2]]
    truth = read_image(base / entries["ground_truth"]) if "ground_truth" in entries else None
    obs = ObservationSet(reference=reference, shifted=shifted, shifts=shifts)
    return obs, chroma, truth, entries


def run_reconstruction(obs, chroma, cfg: dict, baseline: Optional[str] = None, skip_failed_tiles: bool = False):
    """HR image (plane or RGB) and run report, or the bicubic baseline."""
    t0 = time.perf_counter()
    if baseline == "bicubic":
        planes = [obs.reference] + (chroma or [])
        up = [bicubic_upsample(p) for p in planes]
        img = yiq_to_rgb(np.stack(up, axis=-1)) if chroma else up[0]
        return img, None, time.perf_counter() - t0
    grid = make_grid(*obs.shape, cfg["block_size"], cfg["overlap"])
    kwargs = dict(threads=cfg["threads"], skip_failed_tiles=skip_failed_tiles, coupling=cfg["coupling"])
    if chroma:
        img, report = reconstruct_color(obs, chroma, grid=grid, tsvd=_tsvd(cfg), **kwargs)
    else:
        img, report = reconstruct(obs, grid, _tsvd(cfg), **kwargs)
    return img, report, time.perf_counter() - t0


def cmd_reconstruct(args, cfg: dict) -> int:
    obs, chroma, truth, entries = load_observations(args.source)
    img, report, wall = run_reconstruction(obs, chroma, cfg, args.baseline, args.skip_failed_tiles)
    write_image(args.out, img, cfg["bit_depth"])
    lines = [f"# {'bicubic baseline' if report is None else 'reconstruction'} of {args.source}"]
    lines += [f"config.{k}={v}" for k, v in cfg.items()]
    if truth is not None:
        for border in sorted({cfg["border_exclude"], 0}, reverse=True):
            q = evaluate(_luma(img), _luma(truth), border)
            lines.append(f"metrics.border{border}=psnr:{q.psnr:.4f} rmse:{q.rmse:.6f} ssim:{q.ssim:.6f}")
    if report is not None:
        lines.append(report.to_text().rstrip("\n"))
    else:
        lines.append(f"wall_time_s={wall:.3f}")
    report_path = Path(args.report) if args.report else Path(str(args.out) + ".report.txt")
    report_path.write_text("\n".join(lines) + "\n")
    if report is not None and report.failed_tiles:
        print(f"warning: {len(report.failed_tiles)} tile(s) failed and used zero details", file=sys.stderr)
    print(f"wrote {args.out} ({img.shape[1]}x{img.shape[0]}) and {report_path}")
    return 0


# -- evaluate / bench -------------------------------------------------------------

def _csv_text(rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    writer.writerows(rows)
    return buf.getvalue()


def _metric_rows(image, method, est, truth, border, wall):
    rows = [evaluate(_luma(est), _luma(truth), border).csv_row(image, method, wall)]
    if border:
        rows.append(evaluate(_luma(est), _luma(truth), 0).csv_row(image, f"{method} (full frame)", wall))
    return rows


def _emit(text: str, path: Optional[str]) -> None:
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_evaluate(args, cfg: dict) -> int:
    est = read_image(args.reconstruction)
    truth = read_image(args.ground_truth)
    if est.shape != truth.shape:
        raise DataError(f"reconstruction is {est.shape}, ground truth is {truth.shape}")
    image = args.image or Path(args.ground_truth).stem
    rows = _metric_rows(image, args.method, est, truth, cfg["border_exclude"], args.wall_time)
    _emit(_csv_text(rows), args.csv)
    return 0


def cmd_bench(args, cfg: dict) -> int:
    rows = []
    seeds = args.seeds if args.seeds else [cfg["seed"]]
    for path in args.images:
        hr = read_image(path)
        for seed in seeds:
            run_cfg = dict(cfg, seed=seed)
            shifts = _draw_shifts(run_cfg, args.shift)
            obs, chroma = degrade_image(hr, shifts, run_cfg)
            c = obs.crop
            truth = hr[2 * c.top : 2 * (c.top + c.height), 2 * c.left : 2 * (c.left + c.width)]
            name = f"{Path(path).stem}@seed{seed}"
            for method, baseline in (("proposed", None), ("bicubic", "bicubic")):
                img, _, wall = run_reconstruction(obs, chroma, run_cfg, baseline)
                rows.extend(_metric_rows(name, method, img, truth, cfg["border_exclude"], wall))
    _emit(_csv_text(rows), args.csv)
    return 0


# -- parser -----------------------------------------------------------------------

def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key=value file; flags override it")
    p.add_argument("-v", "--verbose", action="store_true")


def _add_solver_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--block-size", type=_positive_int, help="tile size in LR pixels (default 32)")
    p.add_argument("--overlap", type=_non_negative_int, help="tile overlap in LR pixels (default 8)")
    p.add_argument("--gap-ratio-min", type=_gap_ratio, help="TSVD gap threshold (default 10)")
    p.add_argument("--max-rank", type=_max_rank, help="TSVD rank cap or 'full'")
    p.add_argument("--cost-probe", type=_bool, help="break TSVD rank ties with the cost scan")
    p.add_argument("--threads", type=_positive_int, help="worker threads (default 1)")
    p.add_argument("--coupling", choices=COUPLINGS, help="how tiles obtain neighbouring detail values")
    p.add_argument("--border-exclude", type=_non_negative_int, help="HR pixels ignored by metrics (default 2)")


def _add_degrade_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--shift", nargs=2, action="append", metavar=("DX", "DY"), help="LR-pixel shift; give three")
    p.add_argument("--random", action="store_true", help="draw three random dyadic shifts")
    p.add_argument("--seed", type=int, help="seed for shifts and noise (default 0)")
    p.add_argument("--noise-sigma", type=_non_negative_float, help="Gaussian noise std (default 0)")
    p.add_argument("--ell", type=_non_negative_int, help="added levels, shift resolution 1/2^(ell+1) (default 4)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="haarsr", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("degrade", help="make an observation set from an HR image")
    p.add_argument("hr")
    p.add_argument("out_dir")
    _add_degrade_flags(p)
    _add_common(p)

    p = sub.add_parser("reconstruct", help="reconstruct the HR image from an observation set")
    p.add_argument("source", help="manifest file or directory containing one")
    p.add_argument("out")
    _add_solver_flags(p)
    p.add_argument("--baseline", choices=("bicubic",), help="write a baseline instead of the reconstruction")
    p.add_argument("--skip-failed-tiles", action="store_true", help="use zero details for tiles that fail")
    p.add_argument("--bit-depth", type=int, choices=(8, 16), help="output sample depth (default 8)")
    p.add_argument("--report", help="run report path (default OUT.report.txt)")
    _add_common(p)

    p = sub.add_parser("evaluate", help="PSNR, RMSE and SSIM as a CSV row")
    p.add_argument("reconstruction")
    p.add_argument("ground_truth")
    p.add_argument("--border-exclude", type=_non_negative_int)
    p.add_argument("--image", help="image column (default: ground-truth file stem)")
    p.add_argument("--method", default="proposed")
    p.add_argument("--wall-time", type=float, default=0.0)
    p.add_argument("--csv", help="write CSV here instead of stdout")
    _add_common(p)

    p = sub.add_parser("bench", help="degrade, reconstruct and score images against bicubic")
    p.add_argument("images", nargs="+")
    _add_degrade_flags(p)
    _add_solver_flags(p)
    p.add_argument("--seeds", type=int, nargs="+", help="one run per seed")
    p.add_argument("--csv", help="write CSV here instead of stdout")
    _add_common(p)
    return parser


COMMANDS = {
    "degrade": cmd_degrade,
    "reconstruct": cmd_reconstruct,
    "evaluate": cmd_evaluate,
    "bench": cmd_bench,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if getattr(args, "random", False) and args.shift:
            raise UsageError("--random and --shift are mutually exclusive")
        if args.command == "degrade" and not args.random and not args.shift:
            raise UsageError("give three --shift DX DY pairs or --random")
        cfg = resolve_config(args)
        return COMMANDS[args.command](args, cfg)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"haarsr: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SolverError as exc:
        print(f"haarsr: solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (DataError, OSError, ValueError) as exc:
        print(f"haarsr: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
