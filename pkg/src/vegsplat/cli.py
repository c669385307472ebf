"""Command-line interface.

Subcommands: synth, make-refs, train, render, eval, compress,
export-viewer.  Exit codes: 0 success, 2 usage/input error, 3 runtime/data
error.  Every subcommand is reproducible for a fixed --seed.
"""

from __future__ import annotations

import argparse
import json
import math
import shutil
import sys
import time
from pathlib import Path

import numpy as np

from .camera import Camera, OrbitSpec, fit_zoom
from .colormaps import colormap_names, named_colormap
from .errors import DataError, FormatError, TrainingError
from .images import write_png
from .metrics import psnr, run_benchmark, ssim_eval, held_out_test_orbit
from .model import (
    load_model,
    load_model_raw,
    save_model,
    save_vq_model,
    vq_compress,
    vq_decompress,
)
from .raster import DEFAULT_SETTINGS, render
from .reference import RaymarchConfig, render_dataset
from .train import TrainConfig, config_from_file, config_from_flags, load_training_data, train
from .transfer import (
    TransferFunction,
    linear_opacity_map,
    load_tf,
    make_training_opacity_maps,
)
from .volume import generate_synthetic, load_structured, load_unstructured, save_structured


def _load_volume(path: str):
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"volume file not found: {p}")
    if p.suffix.lower() == ".vtet":
        return load_unstructured(p)
    return load_structured(p)


def _volume_args(parser):
    parser.add_argument("--volume", required=True, help="raw grid (.raw + sidecar) or tet mesh (.vtet)")


def _orbit_args(parser, azimuths=16, elevations=10, res=800):
    parser.add_argument("--azimuths", type=int, default=azimuths)
    parser.add_argument("--elevations", type=int, default=elevations)
    parser.add_argument("--elevation-range", default="-72,72", help="degrees lo,hi")
    parser.add_argument("--radius", default="auto", help="orbit radius or 'auto' (bbox fit)")
    parser.add_argument("--res", type=int, default=res, help="square image resolution")
    parser.add_argument("--fov", type=float, default=60.0, help="vertical field of view, degrees")


def _resolve_orbit(args, volume) -> tuple[OrbitSpec, Camera]:
    lo, hi = volume.bbox
    center = 0.5 * (lo + hi)
    fov_y = math.radians(args.fov)
    el_lo, el_hi = (math.radians(float(x)) for x in args.elevation_range.split(","))
    if args.radius == "auto":
        radius = fit_zoom(lo, hi, fov_y, aspect=1.0, azimuth_count=args.azimuths,
                          elevation_count=args.elevations, elevation_range=(el_lo, el_hi))
    else:
        radius = float(args.radius)
    diag = float(np.linalg.norm(hi - lo))
    template = Camera(position=(0.0, 0.0, 1.0), target=tuple(center), fov_y=fov_y,
                      width=args.res, height=args.res,
                      near=max(1e-4 * diag, radius - diag), far=radius + diag)
    orbit = OrbitSpec(azimuth_count=args.azimuths, elevation_count=args.elevations,
                      radius=radius, center=tuple(center), elevation_range=(el_lo, el_hi))
    return orbit, template


def _training_tfs(steps: int, single_linear: bool, colormap: str) -> list[TransferFunction]:
    cm = named_colormap(colormap)
    if single_linear:
        return [TransferFunction(color=cm, opacity=linear_opacity_map())]
    return [TransferFunction(color=cm, opacity=m) for m in make_training_opacity_maps(steps)]


def cmd_synth(args) -> int:
    vol = generate_synthetic(args.kind, args.dims, seed=args.seed, count=args.count)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_structured(vol, out)
    print(f"wrote {out} ({vol.dims[0]}x{vol.dims[1]}x{vol.dims[2]}, raw range "
          f"{vol.raw_range[0]:.4g}..{vol.raw_range[1]:.4g})")
    return 0


def _make_refs(args, volume, out_dir: Path) -> dict:
    orbit, template = _resolve_orbit(args, volume)
    tfs = _training_tfs(args.steps, args.single_linear_tf, args.colormap)
    rm = RaymarchConfig(background=tuple(float(x) for x in args.background.split(",")))
    lo, hi = volume.bbox
    descriptor = {
        "volume_path": str(Path(args.volume).resolve()),
        "volume_format": "vtet" if args.volume.lower().endswith(".vtet") else "raw",
        "bbox_min": [float(x) for x in lo],
        "bbox_max": [float(x) for x in hi],
        "raw_range": [float(volume.raw_range[0]), float(volume.raw_range[1])],
        "opacity_steps": args.steps,
        "single_linear_tf": bool(args.single_linear_tf),
        "colormap": args.colormap,
        "fov_y": template.fov_y,
        "resolution": [template.width, template.height],
        "seed": args.seed,
    }
    manifest = render_dataset(volume, tfs, orbit, template, out_dir, rm,
                              write_float=args.float_dumps, descriptor=descriptor)
    with open(out_dir / "descriptor.json", "w") as f:
        json.dump(descriptor, f, indent=1, sort_keys=True)
    return manifest


def cmd_make_refs(args) -> int:
    volume = _load_volume(args.volume)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = _make_refs(args, volume, out_dir)
    print(f"wrote {len(manifest['images'])} reference images to {out_dir}")
    return 0


def cmd_train(args) -> int:
    if args.dataset and args.volume is None and args.init == "volume":
        pass  # volume may come from the dataset descriptor
    if args.dataset is None and args.volume is None:
        raise SystemExit2("train needs --dataset or --volume")
    if args.dataset is not None:
        for flag in ("steps", "single_linear_tf"):
            if getattr(args, flag) != _TRAIN_DATASET_DEFAULTS[flag]:
                raise SystemExit2(f"--{flag.replace('_', '-')} only applies when training from --volume")

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    overrides = {
        "iterations": args.iterations,
        "seed": args.seed,
        "init_points": args.init_points,
        "init_mode": args.init,
        "no_weights": args.no_weights or None,
        "checkpoint_interval": args.checkpoint_interval,
        "lambda_ssim": args.lambda_ssim,
        "lr_value": args.lr_value,
        "lr_weight": args.lr_weight,
        "prune_weight_threshold": args.prune_threshold,
        "densify_start": args.densify_start,
        "densify_end": args.densify_end,
        "densify_interval": args.densify_interval,
        "densify_grad_threshold": args.densify_grad_threshold,
    }
    if args.config:
        config = config_from_file(args.config, overrides)
    else:
        config = config_from_flags({k: v for k, v in overrides.items() if v is not None})

    volume = None
    if args.volume is not None:
        volume = _load_volume(args.volume)
        dataset_dir = out_dir / "dataset"
        if not (dataset_dir / "manifest.json").exists():
            dataset_dir.mkdir(exist_ok=True)
            _make_refs(args, volume, dataset_dir)
    else:
        dataset_dir = Path(args.dataset)

    data = load_training_data(dataset_dir)
    if volume is None and config.init_mode == "volume":
        vol_path = data.volume_path
        if vol_path is None or not Path(vol_path).exists():
            raise SystemExit2("dataset descriptor has no usable volume path; pass --volume or --init random")
        volume = _load_volume(vol_path)

    if config.no_weights:
        print("ablation: weight training and pruning disabled")
    t0 = time.perf_counter()
    result = train(data, config, out_dir, volume=volume)
    minutes = (time.perf_counter() - t0) / 60.0
    with open(out_dir / "train_summary.json", "w") as f:
        json.dump({"initial_gaussians": result.initial_count,
                   "final_gaussians": len(result.gs),
                   "training_time_min": minutes,
                   "pruning_disabled": config.no_weights}, f, indent=1, sort_keys=True)
    print(f"trained {config.iterations} iterations in {minutes:.1f} min; "
          f"{result.initial_count} -> {len(result.gs)} gaussians; model at {out_dir / 'model.vegs'}")
    return 0


def _tf_from_args(args) -> TransferFunction:
    if args.tf:
        return load_tf(args.tf)
    return TransferFunction(color=named_colormap(args.colormap), opacity=linear_opacity_map())


def cmd_render(args) -> int:
    gs = load_model(args.model)
    tf = _tf_from_args(args)
    lo, hi = gs.bbox()
    center = 0.5 * (lo + hi)
    fov_y = math.radians(args.fov)
    if args.radius == "auto":
        radius = fit_zoom(lo, hi, fov_y, aspect=1.0, azimuth_count=1, elevation_count=1,
                          elevation_range=(-0.1, 0.1)) if np.all(hi > lo) else 3.0
    else:
        radius = float(args.radius)
    diag = max(float(np.linalg.norm(hi - lo)), 1e-6)
    from .camera import orbit_position

    az = math.radians(args.azimuth)
    el = math.radians(args.elevation)
    cam = Camera(position=tuple(orbit_position(center, radius, az, el)), target=tuple(center),
                 fov_y=fov_y, width=args.res, height=args.res,
                 near=max(1e-4 * diag, radius - diag), far=radius + diag)
    bg = tuple(float(x) for x in args.background.split(","))
    img = render(gs, tf, cam, bg, dtype=np.float32)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_png(out, np.clip(img.rgb, 0.0, 1.0))
    print(f"wrote {out}")
    return 0


def cmd_eval(args) -> int:
    gs = load_model(args.model)
    volume = _load_volume(args.volume)
    steps = args.steps
    colormap = args.colormap
    training_time = None
    if args.dataset:
        desc_path = Path(args.dataset) / "descriptor.json"
        if desc_path.exists():
            desc = json.loads(desc_path.read_text())
            steps = desc.get("opacity_steps", steps)
            colormap = desc.get("colormap", colormap)
        summary_path = Path(args.dataset).parent / "train_summary.json"
        if summary_path.exists():
            training_time = json.loads(summary_path.read_text()).get("training_time_min")
    orbit, template = _resolve_orbit(args, volume)
    test_orbit = held_out_test_orbit(orbit)
    out_dir = Path(args.out)
    report = run_benchmark(
        gs, volume, test_orbit, template,
        train_opacity_steps=steps, train_colormap=colormap,
        raymarch_config=RaymarchConfig(background=tuple(float(x) for x in args.background.split(","))),
        training_time_min=training_time,
        out_dir=out_dir, diff_dumps=args.diff_dumps,
        timing_renders=args.timing_renders, timing_warmup=args.timing_warmup,
    )
    print(report.table())
    print(f"report written to {out_dir}")
    return 0


def cmd_compress(args) -> int:
    gs = load_model(args.model)
    vq = vq_compress(gs, k=args.codebook, iters=args.iters, seed=args.seed)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_vq_model(vq, out)
    orig = Path(args.model).stat().st_size
    print(f"wrote {out}: {orig} -> {out.stat().st_size} bytes "
          f"(codebook {args.codebook}, {len(gs)} gaussians)")
    return 0


def cmd_export_viewer(args) -> int:
    raw = load_model_raw(args.model)
    from .model import VqModel

    gs = vq_decompress(raw) if isinstance(raw, VqModel) else raw
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    dest = out_dir / "model.vegs"
    if Path(args.model).resolve() != dest.resolve():
        shutil.copyfile(args.model, dest)
    raw_range = (0.0, 1.0)
    if args.raw_range:
        raw_range = tuple(float(x) for x in args.raw_range.split(","))

    lo, hi = gs.bbox()
    fov_y = math.radians(60.0)
    radius = fit_zoom(lo, hi, fov_y) if np.all(hi > lo) else 3.0
    tables = {name: [list(p) for p in named_colormap(name).points] for name in colormap_names()}
    manifest = {
        "model": "model.vegs",
        "count": len(gs),
        "bbox": {"min": [float(x) for x in lo], "max": [float(x) for x in hi]},
        "raw_range": [raw_range[0], raw_range[1]],
        "default_colormap": args.default_colormap,
        "colormaps": tables,
        "camera": {"fov_y": fov_y, "radius": radius,
                   "target": [float(x) for x in 0.5 * (lo + hi)]},
    }
    with open(out_dir / "manifest.json", "w") as f:
        json.dump(manifest, f, indent=1, sort_keys=True)
    print(f"viewer bundle written to {out_dir}")
    return 0


class SystemExit2(Exception):
    """Usage/input errors that should exit with code 2."""


_TRAIN_DATASET_DEFAULTS = {"steps": 10, "single_linear_tf": False}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vegsplat",
        description="Transfer-function-agnostic Gaussian splatting of scalar volumes",
    )
    parser.add_argument("--threads", type=int, default=0, help="cap worker threads (0 = all cores)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic test volume")
    p.add_argument("--kind", choices=["blobs", "marschner_lobb", "spherical_shells"], required=True)
    p.add_argument("--dims", type=int, default=64)
    p.add_argument("--count", type=int, default=3, help="blob/shell count")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("make-refs", help="render reference images for training")
    _volume_args(p)
    _orbit_args(p)
    p.add_argument("--steps", type=int, default=10, help="training opacity map count")
    p.add_argument("--single-linear-tf", action="store_true")
    p.add_argument("--colormap", default="viridis")
    p.add_argument("--background", default="1,1,1")
    p.add_argument("--float-dumps", action="store_true", help="also write float PFM images")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_make_refs)

    p = sub.add_parser("train", help="optimize a model on a dataset or volume")
    p.add_argument("--dataset", help="directory from make-refs")
    p.add_argument("--volume", help="train straight from a volume (generates the dataset)")
    _orbit_args(p, azimuths=16, elevations=10, res=800)
    p.add_argument("--steps", type=int, default=10)
    p.add_argument("--single-linear-tf", action="store_true")
    p.add_argument("--colormap", default="viridis")
    p.add_argument("--background", default="1,1,1")
    p.add_argument("--float-dumps", action="store_true", help=argparse.SUPPRESS)
    p.add_argument("--config", help="key = value config file")
    p.add_argument("--iterations", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--init", choices=["volume", "random"], default="volume")
    p.add_argument("--init-points", type=int, dest="init_points")
    p.add_argument("--no-weights", action="store_true")
    p.add_argument("--checkpoint-interval", type=int, dest="checkpoint_interval")
    p.add_argument("--lambda-ssim", type=float, dest="lambda_ssim")
    p.add_argument("--lr-value", type=float, dest="lr_value")
    p.add_argument("--lr-weight", type=float, dest="lr_weight")
    p.add_argument("--prune-threshold", type=float, dest="prune_threshold")
    p.add_argument("--densify-start", type=int, dest="densify_start")
    p.add_argument("--densify-end", type=int, dest="densify_end")
    p.add_argument("--densify-interval", type=int, dest="densify_interval")
    p.add_argument("--densify-grad-threshold", type=float, dest="densify_grad_threshold")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("render", help="render one view of a model")
    p.add_argument("--model", required=True)
    p.add_argument("--tf", help="transfer function json")
    p.add_argument("--colormap", default="viridis", help="used with a linear opacity ramp if no --tf")
    p.add_argument("--azimuth", type=float, default=30.0, help="degrees")
    p.add_argument("--elevation", type=float, default=20.0, help="degrees")
    p.add_argument("--radius", default="auto")
    p.add_argument("--res", type=int, default=800)
    p.add_argument("--fov", type=float, default=60.0)
    p.add_argument("--background", default="1,1,1")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("eval", help="run the four evaluation suites against the oracle")
    p.add_argument("--model", required=True)
    _volume_args(p)
    p.add_argument("--dataset", help="training dataset dir (reads steps/colormap/timing)")
    _orbit_args(p, azimuths=16, elevations=10, res=800)
    p.add_argument("--steps", type=int, default=10)
    p.add_argument("--colormap", default="viridis")
    p.add_argument("--background", default="1,1,1")
    p.add_argument("--diff-dumps", action="store_true")
    p.add_argument("--timing-renders", type=int, default=100)
    p.add_argument("--timing-warmup", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("compress", help="vector-quantize model attributes")
    p.add_argument("--model", required=True)
    p.add_argument("--codebook", type=int, default=4096)
    p.add_argument("--iters", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_compress)

    p = sub.add_parser("export-viewer", help="write a browser viewer bundle")
    p.add_argument("--model", required=True)
    p.add_argument("--raw-range", help="lo,hi of the original field values")
    p.add_argument("--default-colormap", default="viridis")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export_viewer)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.threads and args.threads > 0:
        import numba

        numba.set_num_threads(args.threads)
    try:
        return args.func(args)
    except (SystemExit2, FileNotFoundError, ValueError) as e:
        if isinstance(e, (FormatError, DataError)):
            print(f"error: {e}", file=sys.stderr)
            return 3
        print(f"error: {e}", file=sys.stderr)
        return 2
    except (TrainingError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
