"""Differentiable splat rendering pipeline.

Forward: shade -> project -> tile blend.  All blended quantities ride one
channel matrix per splat (rgb, camera depth, unit normal, lighting
attributes), so auxiliary planes are produced by the very same compositing
as color and the alpha plane is exactly 1 - final transmittance.

Backward: the blend kernel replays each pixel back to front and emits
per-instance gradients of channels, base opacity, screen mean and conic;
these are reduced per Gaussian in a fixed order and chained through
projection and shading to every raw parameter.  Culled or never-blended
splats receive exact zeros.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..camera import Camera
from ..images import ImageBuffer
from ..model import BETA_MAX, GaussianSet
from ..transfer import TransferFunction
from .constants import DEFAULT_SETTINGS, RasterSettings
from .kernels import blend_backward, blend_forward
from .projection import ProjectResult, project, project_backward
from .shading import ShadeResult, shade, shade_backward

# channel layout when auxiliary planes are blended
_CH_RGB = slice(0, 3)
_CH_DEPTH = 3
_CH_NORMAL = slice(4, 7)
_CH_ATTRS = slice(7, 11)
N_AUX_CHANNELS = 11
ATTR_PLANE_NAMES = ("k_ambient", "k_diffuse", "k_specular", "shininess_norm")


@dataclass
class SplatData:
    """Projected, shaded splats ready for blending."""

    mean2d: np.ndarray    # (m, 2)
    conic: np.ndarray     # (m, 3) packed (a, b, c)
    alpha_base: np.ndarray
    depth: np.ndarray
    rect: np.ndarray      # (m, 4) int32
    channels: np.ndarray  # (m, C)


@dataclass
class BlendState:
    """Everything the backward pass needs to replay the forward blend."""

    width: int
    height: int
    tile_size: int
    tiles_x: int
    n_tiles: int
    order: np.ndarray        # instance -> splat index (sorted by tile, depth)
    tile_start: np.ndarray
    tile_end: np.ndarray
    inst_mean2d: np.ndarray
    inst_conic: np.ndarray
    inst_alpha: np.ndarray
    inst_pmin: np.ndarray
    inst_rect: np.ndarray
    inst_channels: np.ndarray
    bg_vec: np.ndarray
    out_t: np.ndarray
    out_last: np.ndarray
    n_splats: int
    settings: RasterSettings


@dataclass
class RenderState:
    """Full forward cache for the end-to-end backward chain."""

    gs: GaussianSet
    tf: TransferFunction
    camera: Camera
    settings: RasterSettings
    shade_cache: ShadeResult
    proj: ProjectResult
    kept: np.ndarray        # indices into the full set that reached blending
    blend: BlendState
    with_aux: bool
    image: ImageBuffer


@dataclass
class ImageGradients:
    """Loss gradients with respect to the rendered planes."""

    rgb: np.ndarray
    alpha: np.ndarray | None = None
    depth: np.ndarray | None = None
    normal: np.ndarray | None = None
    attrs: np.ndarray | None = None


@dataclass
class GradientSet:
    position: np.ndarray
    log_scale: np.ndarray
    rotation: np.ndarray
    raw_value: np.ndarray
    raw_weight: np.ndarray
    normal: np.ndarray
    raw_ka: np.ndarray
    raw_kd: np.ndarray
    raw_ks: np.ndarray
    raw_beta: np.ndarray
    viewspace_norm: np.ndarray  # per-Gaussian ||d mean2d|| in pixels
    visible: np.ndarray         # splats that reached blending

    @staticmethod
    def zeros(n: int) -> "GradientSet":
        return GradientSet(
            position=np.zeros((n, 3)), log_scale=np.zeros((n, 3)), rotation=np.zeros((n, 4)),
            raw_value=np.zeros(n), raw_weight=np.zeros(n), normal=np.zeros((n, 3)),
            raw_ka=np.zeros(n), raw_kd=np.zeros(n), raw_ks=np.zeros(n), raw_beta=np.zeros(n),
            viewspace_norm=np.zeros(n), visible=np.zeros(n, dtype=bool),
        )

    def arrays(self) -> dict[str, np.ndarray]:
        return {k: getattr(self, k) for k in (
            "position", "log_scale", "rotation", "raw_value", "raw_weight",
            "normal", "raw_ka", "raw_kd", "raw_ks", "raw_beta")}

    def all_finite(self) -> bool:
        return all(np.all(np.isfinite(v)) for v in self.arrays().values())


def build_splat_data(gs: GaussianSet, tf: TransferFunction, camera: Camera,
                     settings: RasterSettings = DEFAULT_SETTINGS,
                     with_aux: bool = False) -> tuple[SplatData, ShadeResult, ProjectResult, np.ndarray]:
    """shade + project + channel assembly; returns kept indices into gs."""
    sh = shade(gs, tf, camera, settings)
    vis_idx = np.flatnonzero(sh.visible)
    proj = project(gs, camera, index=vis_idx, settings=settings,
                   alpha_base=sh.alpha_base[vis_idx])
    kept = vis_idx[proj.in_view]

    m = len(kept)
    n_ch = N_AUX_CHANNELS if with_aux else 3
    channels = np.zeros((m, n_ch))
    channels[:, _CH_RGB] = sh.color[kept]
    if with_aux:
        channels[:, _CH_DEPTH] = proj.depth
        channels[:, _CH_NORMAL] = sh.n_hat[kept]
        channels[:, 7] = sh.ka[kept]
        channels[:, 8] = sh.kd[kept]
        channels[:, 9] = sh.ks[kept]
        channels[:, 10] = sh.beta[kept] / BETA_MAX
    data = SplatData(mean2d=proj.mean2d, conic=proj.conic, alpha_base=sh.alpha_base[kept],
                     depth=proj.depth, rect=proj.rect, channels=channels)
    return data, sh, proj, kept


def _build_instances(rect: np.ndarray, depth: np.ndarray, tile_size: int,
                     width: int, height: int) -> tuple[np.ndarray, np.ndarray, np.ndarray, int]:
    """Duplicate splats into overlapped tiles; returns (order, start, end, tiles_x)."""
    tiles_x = (width + tile_size - 1) // tile_size
    tiles_y = (height + tile_size - 1) // tile_size
    n_tiles = tiles_x * tiles_y
    m = len(rect)
    if m == 0:
        empty = np.zeros(0, dtype=np.int64)
        return empty, np.zeros(n_tiles, dtype=np.int64), np.zeros(n_tiles, dtype=np.int64), tiles_x

    tx0 = rect[:, 0] // tile_size
    tx1 = (rect[:, 1] - 1) // tile_size
    ty0 = rect[:, 2] // tile_size
    ty1 = (rect[:, 3] - 1) // tile_size
    nx = (tx1 - tx0 + 1).astype(np.int64)
    ny = (ty1 - ty0 + 1).astype(np.int64)
    counts = nx * ny
    offsets = np.concatenate([[0], np.cumsum(counts)])
    total = int(offsets[-1])
    gid = np.repeat(np.arange(m, dtype=np.int64), counts)
    rank = np.arange(total, dtype=np.int64) - offsets[gid]
    dtx = rank % nx[gid]
    dty = rank // nx[gid]
    tile = (ty0[gid] + dty) * tiles_x + (tx0[gid] + dtx)
    order = np.lexsort((depth[gid], tile))
    gid_sorted = gid[order]
    tile_sorted = tile[order]
    tile_ids = np.arange(n_tiles, dtype=np.int64)
    start = np.searchsorted(tile_sorted, tile_ids, side="left")
    end = np.searchsorted(tile_sorted, tile_ids, side="right")
    return gid_sorted, start, end, tiles_x


def rasterize_forward(data: SplatData, width: int, height: int, background,
                      settings: RasterSettings = DEFAULT_SETTINGS,
                      dtype=np.float64) -> tuple[ImageBuffer, BlendState]:
    """Tile-sorted front-to-back blending of prepared splats."""
    n_ch = data.channels.shape[1]
    bg_vec = np.zeros(n_ch)
    bg_vec[:3] = np.asarray(background, dtype=np.float64)

    order, start, end, tiles_x = _build_instances(data.rect, data.depth,
                                                  settings.tile_size, width, height)
    pmin = np.log(settings.alpha_skip / np.maximum(data.alpha_base, settings.alpha_skip * 1e-6))

    inst_mean2d = np.ascontiguousarray(data.mean2d[order], dtype=dtype)
    inst_conic = np.ascontiguousarray(data.conic[order], dtype=dtype)
    inst_alpha = np.ascontiguousarray(data.alpha_base[order], dtype=dtype)
    inst_pmin = np.ascontiguousarray(pmin[order], dtype=dtype)
    inst_rect = np.ascontiguousarray(data.rect[order])
    inst_channels = np.ascontiguousarray(data.channels[order], dtype=dtype)
    bg_cast = bg_vec.astype(dtype)

    out_img = np.zeros((height, width, n_ch), dtype=dtype)
    out_t = np.ones((height, width), dtype=dtype)
    out_last = np.full((height, width), -1, dtype=np.int64)
    blend_forward(
        start, end, tiles_x, settings.tile_size,
        inst_mean2d, inst_conic, inst_alpha, inst_pmin, inst_rect, inst_channels,
        bg_cast, width, height,
        dtype(settings.alpha_clamp), dtype(settings.transmittance_stop),
        out_img, out_t, out_last,
    )

    img = _image_from_planes(out_img, out_t, n_ch)
    state = BlendState(
        width=width, height=height, tile_size=settings.tile_size, tiles_x=tiles_x,
        n_tiles=len(start), order=order, tile_start=start, tile_end=end,
        inst_mean2d=inst_mean2d, inst_conic=inst_conic, inst_alpha=inst_alpha,
        inst_pmin=inst_pmin, inst_rect=inst_rect, inst_channels=inst_channels,
        bg_vec=bg_cast, out_t=out_t, out_last=out_last,
        n_splats=len(data.alpha_base), settings=settings,
    )
    return img, state


def _image_from_planes(out_img: np.ndarray, out_t: np.ndarray, n_ch: int) -> ImageBuffer:
    rgb = np.ascontiguousarray(out_img[:, :, _CH_RGB])
    alpha = 1.0 - out_t
    if n_ch == 3:
        return ImageBuffer(rgb=rgb, alpha=alpha)
    return ImageBuffer(
        rgb=rgb, alpha=alpha,
        depth=np.ascontiguousarray(out_img[:, :, _CH_DEPTH]),
        normal=np.ascontiguousarray(out_img[:, :, _CH_NORMAL]),
        attrs=np.ascontiguousarray(out_img[:, :, _CH_ATTRS]),
    )


def render(gs: GaussianSet, tf: TransferFunction, camera: Camera,
           background=(1.0, 1.0, 1.0), settings: RasterSettings = DEFAULT_SETTINGS,
           with_aux: bool = False, dtype=np.float64) -> ImageBuffer:
    """shade -> project -> rasterize; deterministic for fixed inputs."""
    img, _ = render_with_state(gs, tf, camera, background, settings, with_aux, dtype)
    return img


def render_with_state(gs: GaussianSet, tf: TransferFunction, camera: Camera,
                      background=(1.0, 1.0, 1.0), settings: RasterSettings = DEFAULT_SETTINGS,
                      with_aux: bool = False, dtype=np.float64) -> tuple[ImageBuffer, RenderState]:
    data, sh, proj, kept = build_splat_data(gs, tf, camera, settings, with_aux)
    img, blend = rasterize_forward(data, camera.width, camera.height, background, settings, dtype)
    state = RenderState(gs=gs, tf=tf, camera=camera, settings=settings,
                        shade_cache=sh, proj=proj, kept=kept, blend=blend,
                        with_aux=with_aux, image=img)
    return img, state


def rasterize_backward(state: RenderState, grads: ImageGradients) -> GradientSet:
    """Analytic gradients of a scalar loss through blending, projection,
    the lighting model and the transfer function, for every raw parameter."""
    blend = state.blend
    n_ch = blend.inst_channels.shape[1]
    h, w = blend.height, blend.width
    dtype = blend.inst_mean2d.dtype

    d_img = np.zeros((h, w, n_ch))
    d_img[:, :, _CH_RGB] = grads.rgb
    if state.with_aux:
        if grads.depth is not None:
            d_img[:, :, _CH_DEPTH] = grads.depth
        if grads.normal is not None:
            d_img[:, :, _CH_NORMAL] = grads.normal
        if grads.attrs is not None:
            d_img[:, :, _CH_ATTRS] = grads.attrs
    d_alpha_plane = np.zeros((h, w)) if grads.alpha is None else np.asarray(grads.alpha, dtype=np.float64)

    n_inst = len(blend.order)
    gi_mean2d = np.zeros((n_inst, 2), dtype=dtype)
    gi_conic = np.zeros((n_inst, 3), dtype=dtype)
    gi_alpha = np.zeros(n_inst, dtype=dtype)
    gi_channels = np.zeros((n_inst, n_ch), dtype=dtype)
    blend_backward(
        blend.tile_start, blend.tile_end, blend.tiles_x, blend.tile_size,
        blend.inst_mean2d, blend.inst_conic, blend.inst_alpha, blend.inst_pmin,
        blend.inst_rect, blend.inst_channels,
        blend.bg_vec, w, h,
        dtype.type(blend.settings.alpha_clamp) if hasattr(dtype, "type") else dtype(blend.settings.alpha_clamp),
        blend.out_t, blend.out_last,
        np.ascontiguousarray(d_img, dtype=dtype), np.ascontiguousarray(d_alpha_plane, dtype=dtype),
        gi_mean2d, gi_conic, gi_alpha, gi_channels,
    )

    # deterministic per-splat reduction (instances are in fixed sorted order)
    m = blend.n_splats
    g_mean2d = np.zeros((m, 2))
    g_conic = np.zeros((m, 3))
    g_alpha = np.zeros(m)
    g_channels = np.zeros((m, n_ch))
    np.add.at(g_mean2d, blend.order, gi_mean2d.astype(np.float64))
    np.add.at(g_conic, blend.order, gi_conic.astype(np.float64))
    np.add.at(g_alpha, blend.order, gi_alpha.astype(np.float64))
    np.add.at(g_channels, blend.order, gi_channels.astype(np.float64))

    d_depth = g_channels[:, _CH_DEPTH] if state.with_aux else np.zeros(m)
    pg = project_backward(state.proj, g_mean2d, g_conic, d_depth)

    n = len(state.gs)
    kept = state.kept
    d_color_full = np.zeros((n, 3))
    d_color_full[kept] = g_channels[:, _CH_RGB]
    d_alpha_full = np.zeros(n)
    d_alpha_full[kept] = g_alpha
    kw = {}
    if state.with_aux:
        d_nhat = np.zeros((n, 3))
        d_nhat[kept] = g_channels[:, _CH_NORMAL]
        attr_g = g_channels[:, _CH_ATTRS]
        d_ka = np.zeros(n)
        d_kd = np.zeros(n)
        d_ks = np.zeros(n)
        d_bn = np.zeros(n)
        d_ka[kept] = attr_g[:, 0]
        d_kd[kept] = attr_g[:, 1]
        d_ks[kept] = attr_g[:, 2]
        d_bn[kept] = attr_g[:, 3]
        kw = dict(d_nhat=d_nhat, d_ka=d_ka, d_kd=d_kd, d_ks=d_ks, d_beta_norm=d_bn)
    sg = shade_backward(state.gs, state.tf, state.shade_cache, d_color_full, d_alpha_full, **kw)

    out = GradientSet.zeros(n)
    out.position += sg.position
    out.position[kept] += pg.position
    out.log_scale[kept] = pg.log_scale
    out.rotation[kept] = pg.rotation
    out.raw_value = sg.raw_value
    out.raw_weight = sg.raw_weight
    out.normal = sg.normal
    out.raw_ka = sg.raw_ka
    out.raw_kd = sg.raw_kd
    out.raw_ks = sg.raw_ks
    out.raw_beta = sg.raw_beta
    # densification convention: positional gradients in half-resolution
    # (NDC-like) units, so thresholds transfer across image sizes
    ndc_scale = np.array([0.5 * w, 0.5 * h])
    out.viewspace_norm[kept] = np.linalg.norm(g_mean2d * ndc_scale, axis=1)
    out.visible[kept] = True

    # shading-path gradients only exist where the splat was actually blended
    invisible = np.ones(n, dtype=bool)
    invisible[kept] = False
    for name, arr in out.arrays().items():
        arr[invisible] = 0.0
    return out
