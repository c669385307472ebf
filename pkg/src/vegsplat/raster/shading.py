"""Per-Gaussian transfer-function mapping and Blinn-Phong shading.

Every Gaussian is mapped once per frame: its stored value picks up color
C(v) and opacity O(v) from the transfer function, the blending base opacity
is O(v) * w, and the shaded color is

    c = k_a * C(v) + k_d * C(v) * |n.l| + [|n.l| > 0] k_s * |n.l|^beta

with a headlight, so the light direction l points from the Gaussian to the
camera and doubles as the Blinn-Phong half-vector.  Gaussians whose base
opacity falls below the cull threshold are masked out before projection.

The backward pass routes pixel-space gradients of color, base opacity and
the auxiliary channel planes to every raw parameter, including the position
path through the per-Gaussian light direction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..camera import Camera
from ..model import BETA_MAX, BETA_MIN, GaussianSet
from ..transfer import TransferFunction, d_color_dv, d_opacity_dv, eval_color, eval_opacity
from .constants import DEFAULT_SETTINGS, RasterSettings


@dataclass
class ShadeResult:
    color: np.ndarray        # (n, 3) shaded rgb
    alpha_base: np.ndarray   # (n,) O(v) * w
    visible: np.ndarray      # (n,) bool, alpha_base >= cull threshold
    # caches for the backward pass
    v: np.ndarray
    w: np.ndarray
    opacity: np.ndarray      # O(v)
    cmap: np.ndarray         # C(v)
    light: np.ndarray        # (n, 3) unit vector toward the camera
    light_dist: np.ndarray
    n_hat: np.ndarray
    n_norm: np.ndarray
    ndotl: np.ndarray        # signed n_hat . l
    ka: np.ndarray
    kd: np.ndarray
    ks: np.ndarray
    beta: np.ndarray
    spec_pow: np.ndarray     # |n.l|^beta where |n.l| > 0 else 0


def shade(gs: GaussianSet, tf: TransferFunction, camera: Camera,
          settings: RasterSettings = DEFAULT_SETTINGS) -> ShadeResult:
    v = gs.values()
    w = gs.weights()
    opacity = eval_opacity(tf.opacity, v)
    alpha_base = opacity * w
    cmap = eval_color(tf.color, v)

    cam_pos = np.asarray(camera.position, dtype=np.float64)
    dvec = cam_pos[None, :] - gs.position
    light_dist = np.linalg.norm(dvec, axis=1)
    light = dvec / light_dist[:, None]

    n_norm = np.linalg.norm(gs.normal, axis=1)
    n_hat = gs.normal / np.maximum(n_norm, 1e-30)[:, None]
    ndotl = np.einsum("ij,ij->i", n_hat, light)
    s = np.abs(ndotl)

    ka, kd, ks, beta = gs.ka(), gs.kd(), gs.ks(), gs.beta()
    lit = s > 0.0
    spec_pow = np.where(lit, np.power(np.maximum(s, 1e-300), beta), 0.0)
    color = (ka + kd * s)[:, None] * cmap + (ks * spec_pow)[:, None]

    visible = alpha_base >= settings.cull_alpha
    return ShadeResult(
        color=color, alpha_base=alpha_base, visible=visible,
        v=v, w=w, opacity=opacity, cmap=cmap,
        light=light, light_dist=light_dist,
        n_hat=n_hat, n_norm=n_norm, ndotl=ndotl,
        ka=ka, kd=kd, ks=ks, beta=beta, spec_pow=spec_pow,
    )


@dataclass
class ShadeGradients:
    raw_value: np.ndarray
    raw_weight: np.ndarray
    normal: np.ndarray
    raw_ka: np.ndarray
    raw_kd: np.ndarray
    raw_ks: np.ndarray
    raw_beta: np.ndarray
    position: np.ndarray  # light-direction path only


def shade_backward(
    gs: GaussianSet,
    tf: TransferFunction,
    cache: ShadeResult,
    d_color: np.ndarray,
    d_alpha_base: np.ndarray,
    d_nhat: np.ndarray | None = None,
    d_ka: np.ndarray | None = None,
    d_kd: np.ndarray | None = None,
    d_ks: np.ndarray | None = None,
    d_beta_norm: np.ndarray | None = None,
) -> ShadeGradients:
    """Chain pixel-space gradients back to raw Gaussian parameters.

    d_color / d_alpha_base come from the blending backward; the optional
    arguments carry gradients of the blended auxiliary channel planes
    (unit normal, lighting coefficients, beta/BETA_MAX).
    """
    n = len(gs)
    v, w = cache.v, cache.w
    s = np.abs(cache.ndotl)
    sign = np.sign(cache.ndotl)
    lit = s > 0.0

    dc_dot_cmap = np.einsum("ij,ij->i", d_color, cache.cmap)
    dc_sum = d_color.sum(axis=1)

    # lighting coefficients (sigmoid stored)
    g_ka = dc_dot_cmap
    g_kd = dc_dot_cmap * s
    g_ks = dc_sum * cache.spec_pow
    if d_ka is not None:
        g_ka = g_ka + d_ka
    if d_kd is not None:
        g_kd = g_kd + d_kd
    if d_ks is not None:
        g_ks = g_ks + d_ks
    raw_ka = g_ka * cache.ka * (1.0 - cache.ka)
    raw_kd = g_kd * cache.kd * (1.0 - cache.kd)
    raw_ks = g_ks * cache.ks * (1.0 - cache.ks)

    # shininess: beta = clamp(exp(raw), 1, 128); zero slope at the clamp
    exp_raw = np.exp(gs.raw_beta)
    beta_active = (exp_raw > BETA_MIN) & (exp_raw < BETA_MAX)
    log_s = np.where(lit, np.log(np.maximum(s, 1e-300)), 0.0)
    g_beta = dc_sum * cache.ks * cache.spec_pow * log_s
    if d_beta_norm is not None:
        g_beta = g_beta + d_beta_norm / BETA_MAX
    raw_beta = np.where(beta_active, g_beta * cache.beta, 0.0)

    # |n.l| path: diffuse + specular slope
    g_s = dc_dot_cmap * cache.kd
    g_s = g_s + np.where(lit, dc_sum * cache.ks * cache.beta * cache.spec_pow / np.maximum(s, 1e-300), 0.0)
    g_ndotl = g_s * sign

    g_nhat = g_ndotl[:, None] * cache.light
    if d_nhat is not None:
        g_nhat = g_nhat + d_nhat
    # through normalization n_hat = n / |n|
    proj = np.einsum("ij,ij->i", g_nhat, cache.n_hat)
    normal = (g_nhat - proj[:, None] * cache.n_hat) / np.maximum(cache.n_norm, 1e-30)[:, None]

    # light direction path to position: l = (cam - mu)/dist
    g_l = g_ndotl[:, None] * cache.n_hat
    proj_l = np.einsum("ij,ij->i", g_l, cache.light)
    position = -(g_l - proj_l[:, None] * cache.light) / cache.light_dist[:, None]

    # value and weight
    dO = d_opacity_dv(tf.opacity, v)
    dC = d_color_dv(tf.color, v)
    g_v = np.einsum("ij,ij->i", d_color, dC) * (cache.ka + cache.kd * s)
    g_v = g_v + d_alpha_base * dO * w
    raw_value = g_v * v * (1.0 - v)
    raw_weight = d_alpha_base * cache.opacity * w * (1.0 - w)

    return ShadeGradients(
        raw_value=raw_value, raw_weight=raw_weight, normal=normal,
        raw_ka=raw_ka, raw_kd=raw_kd, raw_ks=raw_ks, raw_beta=raw_beta,
        position=position,
    )
