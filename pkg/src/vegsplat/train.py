"""Image-space optimization of the Gaussian model.

Each iteration samples one (camera, transfer function) pair from the
training set, renders, computes the loss, backpropagates analytically and
applies Adam with per-parameter-class learning rates (position decays
exponentially to 1/100 of its initial rate).  Densification clones small /
splits large Gaussians whose accumulated view-space positional gradients
exceed a threshold, and pruning drops Gaussians whose activated weight
falls below the prune threshold.
"""

from __future__ import annotations

import json
import logging
import math
import struct
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .camera import Camera, load_cameras
from .errors import TrainingError
from .images import ImageBuffer, read_png
from .loss import LossBreakdown, compute_loss
from .model import GaussianSet, init_from_volume, init_random, load_model, logit, save_model
from .raster import DEFAULT_SETTINGS, GradientSet, RasterSettings, rasterize_backward, render, render_with_state
from .transfer import TransferFunction, tf_from_dict

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    iterations: int = 30000
    lambda_ssim: float = 0.2
    lr_value: float = 0.00025
    lr_weight: float = 0.025
    lr_position: float = 1.6e-4
    lr_position_final: float = 1.6e-6
    lr_scale: float = 5e-3
    lr_rotation: float = 1e-3
    lr_lighting: float = 5e-3
    prune_weight_threshold: float = 0.005
    densify_start: int = 500
    densify_end: int = 20000
    densify_interval: int = 100
    densify_grad_threshold: float = 2e-4
    percent_dense: float = 0.01
    weight_reset_interval: int = 3000
    lr_position_scale_by_extent: bool = False
    normal_loss_weight: float = 0.01
    smooth_loss_weight: float = 0.001
    seed: int = 0
    # artifact knobs
    init_points: int = 30000
    init_mode: str = "volume"        # "volume" | "random"
    no_weights: bool = False         # ablation: weights pinned high, pruning off
    checkpoint_interval: int = 500
    background: tuple[float, float, float] = (1.0, 1.0, 1.0)

    def __post_init__(self):
        for name in ("lr_value", "lr_weight", "lr_position", "lr_scale", "lr_rotation", "lr_lighting"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if not (0.0 <= self.lambda_ssim <= 1.0):
            raise ValueError("lambda_ssim must lie in [0, 1]")
        if self.iterations > 0 and not (self.densify_start < self.densify_end):
            raise ValueError("need densify_start < densify_end")
        if self.init_mode not in ("volume", "random"):
            raise ValueError(f"unknown init_mode {self.init_mode!r}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["background"] = list(self.background)
        return d


def config_from_file(path, overrides: dict | None = None) -> TrainConfig:
    """Flat `key = value` config text, overridden by CLI flags."""
    values: dict = {}
    text = Path(path).read_text()
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"bad config line: {line!r}")
        key, raw = (p.strip() for p in line.split("=", 1))
        values[key] = raw
    if overrides:
        values.update({k: v for k, v in overrides.items() if v is not None})
    return config_from_flags(values)


def config_from_flags(values: dict) -> TrainConfig:
    kwargs = {}
    defaults = TrainConfig()
    for key, raw in values.items():
        if not hasattr(defaults, key):
            raise ValueError(f"unknown config key {key!r}")
        current = getattr(defaults, key)
        if isinstance(raw, str):
            if isinstance(current, bool):
                kwargs[key] = raw.strip().lower() in ("1", "true", "yes", "on")
            elif isinstance(current, int):
                kwargs[key] = int(raw)
            elif isinstance(current, float):
                kwargs[key] = float(raw)
            elif isinstance(current, tuple):
                kwargs[key] = tuple(float(x) for x in raw.split(","))
            else:
                kwargs[key] = raw
        else:
            kwargs[key] = raw
    return TrainConfig(**kwargs)


# -- Adam ----------------------------------------------------------------------

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-15

_PARAM_CLASSES = ("position", "log_scale", "rotation", "raw_value", "raw_weight",
                  "normal", "raw_ka", "raw_kd", "raw_ks", "raw_beta")


@dataclass
class OptimizerState:
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    step: int = 0

    @staticmethod
    def for_set(gs: GaussianSet) -> "OptimizerState":
        return OptimizerState(
            m={k: np.zeros_like(getattr(gs, k)) for k in _PARAM_CLASSES},
            v={k: np.zeros_like(getattr(gs, k)) for k in _PARAM_CLASSES},
        )

    def edit_rows(self, keep: np.ndarray, n_new: int) -> None:
        """Keep moments of surviving rows; fresh rows start at zero."""
        for d in (self.m, self.v):
            for k, arr in d.items():
                tail_shape = (n_new,) + arr.shape[1:]
                d[k] = np.concatenate([arr[keep], np.zeros(tail_shape)])

    def select_rows(self, keep: np.ndarray) -> None:
        for d in (self.m, self.v):
            for k in d:
                d[k] = d[k][keep]


def learning_rates(config: TrainConfig, iteration: int, scene_extent: float = 1.0) -> dict[str, float]:
    t = min(max(iteration, 0), max(config.iterations, 1)) / max(config.iterations, 1)
    lr_pos = config.lr_position * (config.lr_position_final / config.lr_position) ** t
    if config.lr_position_scale_by_extent:
        lr_pos *= scene_extent
    lr_w = 0.0 if config.no_weights else config.lr_weight
    return {
        "position": lr_pos,
        "log_scale": config.lr_scale,
        "rotation": config.lr_rotation,
        "raw_value": config.lr_value,
        "raw_weight": lr_w,
        "normal": config.lr_lighting,
        "raw_ka": config.lr_lighting,
        "raw_kd": config.lr_lighting,
        "raw_ks": config.lr_lighting,
        "raw_beta": config.lr_lighting,
    }


def adam_step(gs: GaussianSet, grads: GradientSet, state: OptimizerState,
              config: TrainConfig, iteration: int, scene_extent: float = 1.0) -> None:
    """One bias-corrected Adam update, in place."""
    lrs = learning_rates(config, iteration, scene_extent)
    state.step += 1
    t = state.step
    c1 = 1.0 - ADAM_BETA1 ** t
    c2 = 1.0 - ADAM_BETA2 ** t
    for name in _PARAM_CLASSES:
        g = getattr(grads, name)
        if not np.all(np.isfinite(g)):
            raise TrainingError(f"non-finite gradient in parameter class {name!r}")
        m = state.m[name]
        v = state.v[name]
        m *= ADAM_BETA1
        m += (1.0 - ADAM_BETA1) * g
        v *= ADAM_BETA2
        v += (1.0 - ADAM_BETA2) * g * g
        update = (m / c1) / (np.sqrt(v / c2) + ADAM_EPS)
        getattr(gs, name)[...] -= lrs[name] * update


# -- densification -------------------------------------------------------------

@dataclass
class DensifyStats:
    grad_accum: np.ndarray   # summed view-space positional gradient norms
    pos_accum: np.ndarray    # summed world-space position gradients
    count: np.ndarray

    @staticmethod
    def zeros(n: int) -> "DensifyStats":
        return DensifyStats(grad_accum=np.zeros(n), pos_accum=np.zeros((n, 3)), count=np.zeros(n))

    def add(self, grads: GradientSet) -> None:
        vis = grads.visible
        self.grad_accum[vis] += grads.viewspace_norm[vis]
        self.pos_accum[vis] += grads.position[vis]
        self.count[vis] += 1.0

    def reset(self, n: int) -> None:
        self.grad_accum = np.zeros(n)
        self.pos_accum = np.zeros((n, 3))
        self.count = np.zeros(n)


SPLIT_SCALE_FACTOR = 1.6
SPLIT_CHILDREN = 2
WEIGHT_RESET_VALUE = 0.01


def reset_weights(gs: GaussianSet, opt: OptimizerState) -> None:
    """Cap activated weights at a small value and clear their moments;
    splats that matter recover within a few hundred iterations, the rest
    drift below the prune threshold."""
    cap = float(logit(WEIGHT_RESET_VALUE))
    np.minimum(gs.raw_weight, cap, out=gs.raw_weight)
    opt.m["raw_weight"][:] = 0.0
    opt.v["raw_weight"][:] = 0.0


def densify_and_prune(gs: GaussianSet, opt: OptimizerState, stats: DensifyStats,
                      config: TrainConfig, scene_extent: float,
                      rng: np.random.Generator, position_lr: float) -> GaussianSet:
    """Clone small / split large high-gradient Gaussians, then prune by weight."""
    n = len(gs)
    counts = np.maximum(stats.count, 1.0)
    avg_grad = stats.grad_accum / counts
    candidates = avg_grad > config.densify_grad_threshold
    max_scale = gs.scales().max(axis=1) if n else np.zeros(0)
    small = candidates & (max_scale <= config.percent_dense * scene_extent)
    big = candidates & ~small

    parts = []
    keep_original = ~big  # split parents are replaced by their children

    clone_idx = np.flatnonzero(small)
    if len(clone_idx):
        clones = gs.select(clone_idx)
        mean_pos_grad = stats.pos_accum[clone_idx] / counts[clone_idx, None]
        norms = np.linalg.norm(mean_pos_grad, axis=1, keepdims=True)
        direction = np.where(norms > 0, mean_pos_grad / np.maximum(norms, 1e-30), 0.0)
        clones.position[...] = clones.position - position_lr * direction
        parts.append(clones)

    split_idx = np.flatnonzero(big)
    if len(split_idx):
        for _ in range(SPLIT_CHILDREN):
            child = gs.select(split_idx)
            eps = rng.standard_normal(size=(len(split_idx), 3))
            from .raster.projection import quat_to_rotmat

            rot = quat_to_rotmat(child.unit_quaternions())
            offset = np.einsum("nij,nj->ni", rot, child.scales() * eps)
            child.position[...] = child.position + offset
            child.log_scale[...] = child.log_scale - math.log(SPLIT_SCALE_FACTOR)
            parts.append(child)

    merged = GaussianSet.concatenate([gs.select(keep_original)] + parts) if parts else gs.select(keep_original)
    n_new = len(merged) - int(keep_original.sum())
    opt.edit_rows(keep_original, n_new)

    if not config.no_weights:
        survivors = merged.weights() >= config.prune_weight_threshold
        merged = merged.select(survivors)
        opt.select_rows(survivors)

    stats.reset(len(merged))
    return merged


# -- training data -------------------------------------------------------------

@dataclass
class TrainingData:
    cameras: list[Camera]
    tfs: list[TransferFunction]
    pairs: list[tuple[int, int]]          # (camera index, tf index)
    images: list[np.ndarray]              # reference rgb per pair, float32
    probe: tuple[Camera, TransferFunction, np.ndarray]
    bbox: tuple[np.ndarray, np.ndarray] | None = None
    volume_path: str | None = None


def load_training_data(dataset_dir) -> TrainingData:
    dataset_dir = Path(dataset_dir)
    manifest_path = dataset_dir / "manifest.json"
    if not manifest_path.exists():
        raise FileNotFoundError(f"no manifest.json in dataset directory {dataset_dir}")
    manifest = json.loads(manifest_path.read_text())
    tfs = [tf_from_dict(d) for d in manifest["tfs"]]
    cameras = []
    cam_key = {}
    pairs = []
    images = []
    from .camera import camera_from_dict

    for entry in manifest["images"]:
        cam = camera_from_dict(entry["camera"])
        key = (entry["azimuth_index"], entry["elevation_index"])
        if key not in cam_key:
            cam_key[key] = len(cameras)
            cameras.append(cam)
        img_path = dataset_dir / entry["image"]
        if not img_path.exists():
            raise FileNotFoundError(f"dataset image missing: {img_path}")
        images.append(read_png(img_path).astype(np.float32))
        pairs.append((cam_key[key], entry["tf_index"]))

    # hold out the last pair as the metrics probe view
    probe_cam_idx, probe_tf_idx = pairs[-1]
    probe = (cameras[probe_cam_idx], tfs[probe_tf_idx], np.asarray(images[-1], dtype=np.float64))
    pairs = pairs[:-1]
    images = images[:-1]

    desc = manifest.get("descriptor", {})
    bbox = None
    if "bbox_min" in desc:
        bbox = (np.array(desc["bbox_min"]), np.array(desc["bbox_max"]))
    return TrainingData(cameras=cameras, tfs=tfs, pairs=pairs, images=images,
                        probe=probe, bbox=bbox, volume_path=desc.get("volume_path"))


# -- deterministic optimizer sidecar -------------------------------------------

def save_optimizer(state: OptimizerState, path) -> None:
    names = sorted(state.m)
    blobs = []
    header = {"step": state.step, "arrays": []}
    for kind, d in (("m", state.m), ("v", state.v)):
        for name in names:
            arr = np.ascontiguousarray(d[name], dtype="<f8")
            header["arrays"].append({"kind": kind, "name": name, "shape": list(arr.shape)})
            blobs.append(arr.tobytes())
    head = json.dumps(header, sort_keys=True).encode()
    with open(path, "wb") as f:
        f.write(b"VEGO")
        f.write(struct.pack("<I", len(head)))
        f.write(head)
        for blob in blobs:
            f.write(blob)


def load_optimizer(path) -> OptimizerState:
    blob = Path(path).read_bytes()
    if blob[:4] != b"VEGO":
        raise ValueError(f"{path}: not an optimizer sidecar")
    (hlen,) = struct.unpack("<I", blob[4:8])
    header = json.loads(blob[8:8 + hlen])
    off = 8 + hlen
    state = OptimizerState(m={}, v={}, step=header["step"])
    for spec in header["arrays"]:
        count = int(np.prod(spec["shape"])) if spec["shape"] else 1
        arr = np.frombuffer(blob, dtype="<f8", count=count, offset=off).reshape(spec["shape"]).copy()
        off += count * 8
        getattr(state, spec["kind"])[spec["name"]] = arr
    return state


# -- the loop ------------------------------------------------------------------

def scene_extent_from_cameras(cameras: list[Camera]) -> float:
    pos = np.array([c.position for c in cameras])
    center = pos.mean(axis=0)
    return 1.1 * float(np.linalg.norm(pos - center, axis=1).max())


@dataclass
class TrainResult:
    gs: GaussianSet
    metrics: list[dict]
    initial_count: int


def train(data: TrainingData, config: TrainConfig, out_dir,
          settings: RasterSettings = DEFAULT_SETTINGS,
          volume=None, initial: GaussianSet | None = None) -> TrainResult:
    """Optimize a Gaussian set against the training images.

    `volume` is required for init_mode="volume" unless `initial` is given.
    Checkpoints (model + optimizer sidecar) and a CSV metrics log land in
    out_dir.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    ckpt_dir = out_dir / "checkpoints"
    ckpt_dir.mkdir(exist_ok=True)
    rng = np.random.default_rng(config.seed)

    if initial is not None:
        gs = initial.copy()
    elif config.init_mode == "volume":
        if volume is None:
            raise ValueError("init_mode='volume' needs the source volume")
        gs = init_from_volume(volume, config.init_points, seed=config.seed)
    else:
        if volume is not None:
            lo, hi = volume.bbox
        elif data.bbox is not None:
            lo, hi = data.bbox
        else:
            raise ValueError("init_mode='random' needs a volume or dataset bbox")
        gs = init_random(lo, hi, config.init_points, seed=config.seed)

    if config.no_weights:
        gs.raw_weight[...] = logit(1.0 - 1e-6)

    initial_count = len(gs)
    opt = OptimizerState.for_set(gs)
    stats = DensifyStats.zeros(len(gs))
    extent = scene_extent_from_cameras(data.cameras)
    n_pairs = len(data.pairs)
    if n_pairs == 0:
        raise ValueError("training set has no (camera, tf) pairs")

    metrics: list[dict] = []
    metrics_path = out_dir / "metrics.csv"
    settings_path = out_dir / "raster_settings.json"
    settings_path.write_text(json.dumps({"raster": settings.to_dict(),
                                         "train": config.to_dict()},
                                        indent=1, sort_keys=True))

    def probe_psnr() -> float:
        from .metrics import psnr

        cam, tf, ref = data.probe
        img = render(gs, tf, cam, config.background, settings, dtype=np.float32)
        return psnr(np.clip(img.rgb, 0.0, 1.0), ref)

    def checkpoint(iteration: int, breakdown: LossBreakdown | None) -> None:
        save_model(gs, ckpt_dir / f"iter_{iteration:06d}.vegs")
        save_optimizer(opt, ckpt_dir / f"iter_{iteration:06d}.opt")
        row = {
            "iteration": iteration,
            "total": breakdown.total if breakdown else math.nan,
            "l1": breakdown.l1 if breakdown else math.nan,
            "ssim": breakdown.ssim_term if breakdown else math.nan,
            "normal": breakdown.normal if breakdown else math.nan,
            "smooth": breakdown.smooth if breakdown else math.nan,
            "n_gaussians": len(gs),
            "probe_psnr": float(probe_psnr()),
        }
        metrics.append(row)
        header = not metrics_path.exists()
        with open(metrics_path, "a") as f:
            if header:
                f.write(",".join(row.keys()) + "\n")
            f.write(",".join(repr(v) if isinstance(v, float) else str(v) for v in row.values()) + "\n")

    if metrics_path.exists():
        metrics_path.unlink()

    breakdown = None
    for it in range(1, config.iterations + 1):
        pick = int(rng.integers(n_pairs))
        cam_idx, tf_idx = data.pairs[pick]
        cam = data.cameras[cam_idx]
        tf = data.tfs[tf_idx]
        ref = data.images[pick]

        img, state = render_with_state(gs, tf, cam, config.background, settings,
                                       with_aux=True, dtype=np.float32)
        px_scale = 2.0 * math.tan(0.5 * cam.fov_y) / cam.height
        loss_val, image_grads, breakdown = compute_loss(img, ref, config, px_scale=px_scale)
        if not math.isfinite(loss_val):
            raise TrainingError(f"non-finite loss at iteration {it}; last checkpoint retained")
        grads = rasterize_backward(state, image_grads)
        adam_step(gs, grads, opt, config, it, extent)
        stats.add(grads)

        if (config.densify_start <= it <= config.densify_end
                and it % config.densify_interval == 0):
            n_before = len(gs)
            gs = densify_and_prune(gs, opt, stats, config, extent, rng,
                                   learning_rates(config, it, extent)["position"])
            if len(gs) != n_before:
                log.info("densify@%d: %d -> %d gaussians", it, n_before, len(gs))

        if (not config.no_weights and config.weight_reset_interval > 0
                and it % config.weight_reset_interval == 0 and it <= config.densify_end):
            reset_weights(gs, opt)
            log.info("weight reset@%d", it)

        if it % config.checkpoint_interval == 0 or it == config.iterations:
            checkpoint(it, breakdown)

    if config.iterations == 0:
        checkpoint(0, None)
    save_model(gs, out_dir / "model.vegs")
    return TrainResult(gs=gs, metrics=metrics, initial_count=initial_count)
