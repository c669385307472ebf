"""Quality metrics and the four-suite evaluation protocol: training
transfer functions, unseen colormaps, broad opacity and narrow opacity,
each rendered by the raymarching oracle and the splat renderer over a test
orbit of views never used in training."""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .camera import Camera, OrbitSpec, generate_orbit
from .colormaps import UNSEEN_TEST_COLORMAPS, named_colormap
from .images import ImageBuffer, write_png
from .loss import ssim
from .model import GaussianSet, model_file_size
from .raster import DEFAULT_SETTINGS, RasterSettings, render
from .reference import RaymarchConfig, raymarch
from .transfer import TransferFunction, make_scaled_opacity_maps, make_training_opacity_maps

PSNR_CAP_DB = 100.0


def _rgb_of(x) -> np.ndarray:
    return x.rgb if isinstance(x, ImageBuffer) else np.asarray(x, dtype=np.float64)


def psnr(a, b) -> float:
    """10 log10(1/MSE) over rgb in [0, 1]; identical images cap at 100 dB."""
    a = _rgb_of(a)
    b = _rgb_of(b)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch {a.shape} vs {b.shape}")
    mse = float(((a - b) ** 2).mean())
    if mse <= 10.0 ** (-PSNR_CAP_DB / 10.0):
        return PSNR_CAP_DB
    return float(10.0 * np.log10(1.0 / mse))


def ssim_eval(a, b) -> float:
    """Same windowed SSIM as the training loss (shared implementation)."""
    a = _rgb_of(a)
    b = _rgb_of(b)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch {a.shape} vs {b.shape}")
    return ssim(a, b)[0]


@dataclass
class SuiteResult:
    psnr: float
    ssim: float
    n_images: int

    def as_dict(self) -> dict:
        return {"psnr": self.psnr, "ssim": self.ssim, "n_images": self.n_images}


@dataclass
class EvalReport:
    suites: dict[str, SuiteResult]
    n_gaussians: int
    file_size_bytes: int
    render_ms: float
    training_time_min: float | None = None

    def as_dict(self) -> dict:
        return {
            "suites": {k: v.as_dict() for k, v in self.suites.items()},
            "n_gaussians": self.n_gaussians,
            "file_size_bytes": self.file_size_bytes,
            "render_ms": self.render_ms,
            "training_time_min": self.training_time_min,
        }

    def table(self) -> str:
        rows = [f"{'suite':<18} {'PSNR (dB)':>10} {'SSIM':>8} {'images':>7}"]
        for name, s in self.suites.items():
            rows.append(f"{name:<18} {s.psnr:>10.2f} {s.ssim:>8.4f} {s.n_images:>7d}")
        rows.append("")
        rows.append(f"{'gaussians':<18} {self.n_gaussians:>10d}")
        rows.append(f"{'file size (MB)':<18} {self.file_size_bytes / 1e6:>10.2f}")
        rows.append(f"{'render ms':<18} {self.render_ms:>10.2f}")
        if self.training_time_min is not None:
            rows.append(f"{'training (min)':<18} {self.training_time_min:>10.1f}")
        return "\n".join(rows)


def held_out_test_orbit(orbit: OrbitSpec) -> OrbitSpec:
    """Same grid rotated by half an azimuth step: guaranteed unseen views."""
    from dataclasses import replace

    half_step = np.pi / orbit.azimuth_count
    return replace(orbit, azimuth_offset=orbit.azimuth_offset + half_step)


def _suite_tfs(steps: int, train_colormap: str) -> dict[str, list[TransferFunction]]:
    train_cm = named_colormap(train_colormap)
    train_maps = make_training_opacity_maps(steps)
    suites: dict[str, list[TransferFunction]] = {}
    suites["training_tf"] = [TransferFunction(color=train_cm, opacity=m) for m in train_maps]
    unseen = []
    for name in UNSEEN_TEST_COLORMAPS:
        cm = named_colormap(name)
        unseen.extend(TransferFunction(color=cm, opacity=m) for m in train_maps)
    suites["unseen_colormaps"] = unseen
    suites["broad_opacity"] = [TransferFunction(color=train_cm, opacity=m)
                               for m in make_scaled_opacity_maps(steps, 0.5)]
    suites["narrow_opacity"] = [TransferFunction(color=train_cm, opacity=m)
                                for m in make_scaled_opacity_maps(steps, 2.0)]
    return suites


def run_benchmark(
    gs: GaussianSet,
    volume,
    test_orbit: OrbitSpec,
    camera_template: Camera,
    train_opacity_steps: int = 10,
    train_colormap: str = "viridis",
    raymarch_config: RaymarchConfig = RaymarchConfig(),
    settings: RasterSettings = DEFAULT_SETTINGS,
    training_time_min: float | None = None,
    out_dir=None,
    diff_dumps: bool = False,
    timing_renders: int = 100,
    timing_warmup: int = 10,
) -> EvalReport:
    """Render every suite with both renderers and aggregate PSNR/SSIM."""
    cameras = generate_orbit(test_orbit, camera_template)
    suites = _suite_tfs(train_opacity_steps, train_colormap)
    out_dir = Path(out_dir) if out_dir is not None else None
    if out_dir is not None:
        (out_dir / "diff").mkdir(parents=True, exist_ok=True) if diff_dumps else out_dir.mkdir(
            parents=True, exist_ok=True)

    results: dict[str, SuiteResult] = {}
    for name, tfs in suites.items():
        psnrs = []
        ssims = []
        for ci, cam in enumerate(cameras):
            for ti, tf in enumerate(tfs):
                ref = raymarch(volume, tf, cam, raymarch_config)
                ref_rgb = np.clip(ref.rgb, 0.0, 1.0)
                img = render(gs, tf, cam, raymarch_config.background, settings, dtype=np.float32)
                img_rgb = np.clip(img.rgb, 0.0, 1.0)
                psnrs.append(psnr(img_rgb, ref_rgb))
                ssims.append(ssim_eval(img_rgb, ref_rgb))
                if diff_dumps and out_dir is not None:
                    diff = np.abs(img_rgb - ref_rgb).mean(axis=2)
                    heat = np.repeat(np.clip(diff * 4.0, 0.0, 1.0)[:, :, None], 3, axis=2)
                    write_png(out_dir / "diff" / f"{name}_cam{ci:02d}_tf{ti:02d}.png", heat)
        results[name] = SuiteResult(psnr=float(np.mean(psnrs)), ssim=float(np.mean(ssims)),
                                    n_images=len(psnrs))

    # render timing: mean over timed frames after warm-up
    timing_cam = cameras[0]
    timing_tf = suites["training_tf"][0]
    for _ in range(timing_warmup):
        render(gs, timing_tf, timing_cam, raymarch_config.background, settings, dtype=np.float32)
    t0 = time.perf_counter()
    for _ in range(timing_renders):
        render(gs, timing_tf, timing_cam, raymarch_config.background, settings, dtype=np.float32)
    render_ms = (time.perf_counter() - t0) / max(timing_renders, 1) * 1000.0

    report = EvalReport(
        suites=results,
        n_gaussians=len(gs),
        file_size_bytes=model_file_size(len(gs)),
        render_ms=render_ms,
        training_time_min=training_time_min,
    )
    if out_dir is not None:
        with open(out_dir / "report.json", "w") as f:
            json.dump(report.as_dict(), f, indent=1, sort_keys=True)
        (out_dir / "report.txt").write_text(report.table() + "\n")
    return report
