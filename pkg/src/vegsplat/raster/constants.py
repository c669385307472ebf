"""Rasterizer constants, centralized so training checkpoints can record them.

The blending thresholds follow the de-facto contract of tile-based Gaussian
splatting: 16x16 pixel tiles, +0.3px^2 covariance dilation, per-splat alpha
clamped to 0.99, contributions below 1/255 skipped, rays terminated below
1e-4 transmittance, and a 3-sigma splat radius.  Culling of low-opacity
Gaussians shares the 1/255 threshold.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass


@dataclass(frozen=True)
class RasterSettings:
    tile_size: int = 16
    dilation: float = 0.3
    alpha_clamp: float = 0.99
    alpha_skip: float = 1.0 / 255.0
    transmittance_stop: float = 1e-4
    radius_sigma: float = 3.0
    rect_margin_px: float = 0.5   # slack beyond the exact 1/255 level set
    cull_alpha: float = 1.0 / 255.0
    frustum_limit: float = 1.3    # view-space x/z, y/z clamp factor for the Jacobian

    def to_dict(self) -> dict:
        return asdict(self)

    @staticmethod
    def from_dict(d: dict) -> "RasterSettings":
        return RasterSettings(**d)


DEFAULT_SETTINGS = RasterSettings()
