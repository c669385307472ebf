"""Differentiable tile-based splat rasterizer."""

from .constants import DEFAULT_SETTINGS, RasterSettings
from .pipeline import (
    BlendState,
    GradientSet,
    ImageGradients,
    RenderState,
    SplatData,
    build_splat_data,
    rasterize_backward,
    rasterize_forward,
    render,
    render_with_state,
)
from .projection import ProjectResult, project, project_backward, quat_to_rotmat
from .shading import ShadeResult, shade, shade_backward

__all__ = [
    "BlendState",
    "DEFAULT_SETTINGS",
    "GradientSet",
    "ImageGradients",
    "ProjectResult",
    "RasterSettings",
    "RenderState",
    "ShadeResult",
    "SplatData",
    "build_splat_data",
    "project",
    "project_backward",
    "quat_to_rotmat",
    "rasterize_backward",
    "rasterize_forward",
    "render",
    "render_with_state",
    "shade",
    "shade_backward",
]
