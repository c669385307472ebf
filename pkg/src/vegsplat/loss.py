"""Training loss: (1-lambda) L1 + lambda (1 - SSIM) on rgb, plus a normal
consistency term against depth-derived pseudo-normals and a bilateral
smoothness term on the blended lighting-attribute planes.

SSIM uses an 11x11 Gaussian window (sigma 1.5, K1=0.01, K2=0.03) evaluated
over valid window positions only, which keeps the backward pass an exact
adjoint of the forward convolutions.  All gradients returned here are
analytic and feed the rasterizer backward pass unchanged.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import correlate1d

from .images import ImageBuffer
from .raster.pipeline import ImageGradients

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03
_C1 = SSIM_K1 ** 2
_C2 = SSIM_K2 ** 2


def gaussian_window(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    xs = np.arange(size) - (size - 1) / 2.0
    g = np.exp(-0.5 * (xs / sigma) ** 2)
    g /= g.sum()
    return np.outer(g, g)


_KERNELS: dict = {}


def _kernel(dtype) -> np.ndarray:
    key = np.dtype(dtype).str
    if key not in _KERNELS:
        xs = np.arange(SSIM_WINDOW) - (SSIM_WINDOW - 1) / 2.0
        g = np.exp(-0.5 * (xs / SSIM_SIGMA) ** 2)
        _KERNELS[key] = (g / g.sum()).astype(dtype)
    return _KERNELS[key]


def _conv_valid(plane: np.ndarray) -> np.ndarray:
    half = SSIM_WINDOW // 2
    k = _kernel(plane.dtype)
    out = correlate1d(plane, k, axis=0, mode="constant")
    out = correlate1d(out, k, axis=1, mode="constant")
    return out[half:-half, half:-half]


def _conv_adjoint(grad: np.ndarray, shape: tuple[int, int]) -> np.ndarray:
    half = SSIM_WINDOW // 2
    k = _kernel(grad.dtype)
    full = np.zeros(shape, dtype=grad.dtype)
    full[half:-half, half:-half] = grad
    full = correlate1d(full, k, axis=0, mode="constant")
    full = correlate1d(full, k, axis=1, mode="constant")
    return full


@dataclass
class SsimCache:
    x: np.ndarray
    y: np.ndarray
    mu_x: np.ndarray
    mu_y: np.ndarray
    a1: np.ndarray
    b1: np.ndarray
    a2: np.ndarray
    b2: np.ndarray
    smap: np.ndarray
    n_positions: int


def ssim(x: np.ndarray, y: np.ndarray) -> tuple[float, SsimCache]:
    """Mean SSIM over valid window positions of (H, W, 3) images in [0, 1]."""
    if x.shape != y.shape:
        raise ValueError(f"shape mismatch {x.shape} vs {y.shape}")
    if x.shape[0] < SSIM_WINDOW or x.shape[1] < SSIM_WINDOW:
        raise ValueError(f"images must be at least {SSIM_WINDOW}px for SSIM")
    y = np.asarray(y, dtype=x.dtype)
    chans = x.shape[2]
    mu_x = np.stack([_conv_valid(x[:, :, c]) for c in range(chans)], axis=-1)
    mu_y = np.stack([_conv_valid(y[:, :, c]) for c in range(chans)], axis=-1)
    cxx = np.stack([_conv_valid(x[:, :, c] * x[:, :, c]) for c in range(chans)], axis=-1)
    cyy = np.stack([_conv_valid(y[:, :, c] * y[:, :, c]) for c in range(chans)], axis=-1)
    cxy = np.stack([_conv_valid(x[:, :, c] * y[:, :, c]) for c in range(chans)], axis=-1)
    sig_x = cxx - mu_x * mu_x
    sig_y = cyy - mu_y * mu_y
    sig_xy = cxy - mu_x * mu_y
    a1 = 2.0 * mu_x * mu_y + _C1
    b1 = mu_x * mu_x + mu_y * mu_y + _C1
    a2 = 2.0 * sig_xy + _C2
    b2 = sig_x + sig_y + _C2
    smap = (a1 * a2) / (b1 * b2)
    cache = SsimCache(x=x, y=y, mu_x=mu_x, mu_y=mu_y, a1=a1, b1=b1, a2=a2, b2=b2,
                      smap=smap, n_positions=smap.size)
    return float(smap.mean()), cache


def ssim_backward(cache: SsimCache, upstream: float) -> np.ndarray:
    """d(upstream * mean SSIM)/dx for the first image."""
    coeff = upstream / cache.n_positions
    inv_b1b2 = 1.0 / (cache.b1 * cache.b2)
    s = cache.smap
    g_mu = coeff * (2.0 * cache.mu_y * cache.a2 * inv_b1b2
                    - 2.0 * cache.mu_x * s / cache.b1
                    - 2.0 * cache.mu_y * cache.a1 * inv_b1b2
                    + 2.0 * cache.mu_x * s / cache.b2)
    g_cxx = coeff * (-s / cache.b2)
    g_cxy = coeff * (2.0 * cache.a1 * inv_b1b2)

    h, w, chans = cache.x.shape
    out = np.zeros_like(cache.x)
    for c in range(chans):
        out[:, :, c] += _conv_adjoint(g_mu[:, :, c], (h, w))
        out[:, :, c] += 2.0 * cache.x[:, :, c] * _conv_adjoint(g_cxx[:, :, c], (h, w))
        out[:, :, c] += cache.y[:, :, c] * _conv_adjoint(g_cxy[:, :, c], (h, w))
    return out


@dataclass
class LossBreakdown:
    total: float
    l1: float
    ssim_term: float       # 1 - SSIM
    normal: float
    smooth: float

    def as_dict(self) -> dict:
        return {"total": self.total, "l1": self.l1, "ssim": self.ssim_term,
                "normal": self.normal, "smooth": self.smooth}


def _forward_diffs(plane: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    dx = plane[:, 1:] - plane[:, :-1]
    dy = plane[1:, :] - plane[:-1, :]
    return dx, dy


def compute_loss(rendered: ImageBuffer, reference_rgb: np.ndarray, config,
                 px_scale: float = 1.0) -> tuple[float, ImageGradients, LossBreakdown]:
    """Scalar loss plus analytic gradients for every rendered plane.

    config provides lambda_ssim, normal_loss_weight, smooth_loss_weight.
    px_scale converts one pixel of depth-image distance to world units
    (2 tan(fov_y/2) / height times depth; passed by the trainer).
    """
    rgb = rendered.rgb
    if rgb.shape != reference_rgb.shape:
        raise ValueError(f"rendered {rgb.shape} vs reference {reference_rgb.shape}")
    lam = config.lambda_ssim
    n_el = rgb.size

    diff = rgb - reference_rgb
    l1 = float(np.abs(diff).mean())
    d_rgb = (1.0 - lam) * np.sign(diff) / n_el

    mssim, cache = ssim(rgb, reference_rgb)
    ssim_term = 1.0 - mssim
    d_rgb = d_rgb + ssim_backward(cache, -lam)

    total = (1.0 - lam) * l1 + lam * ssim_term
    d_normal = None
    d_depth = None
    d_attrs = None
    normal_term = 0.0
    smooth_term = 0.0

    if config.normal_loss_weight > 0.0 and rendered.normal is not None and rendered.depth is not None:
        w_n = config.normal_loss_weight
        nr = rendered.normal
        depth = rendered.depth
        h, w = depth.shape
        d_normal = np.zeros_like(nr)
        d_depth = np.zeros_like(depth)

        # interior pixels with real coverage (mask detached from the graph)
        mask = (rendered.alpha > 0.5)
        mask[0, :] = mask[-1, :] = mask[:, 0] = mask[:, -1] = False
        count = int(mask.sum())
        if count > 0:
            gx = np.zeros_like(depth)
            gy = np.zeros_like(depth)
            gx[:, 1:-1] = 0.5 * (depth[:, 2:] - depth[:, :-2])
            gy[1:-1, :] = 0.5 * (depth[2:, :] - depth[:-2, :])
            nd_raw = np.stack([-gx, -gy, px_scale * depth], axis=-1)
            nd_len = np.linalg.norm(nd_raw, axis=-1)
            nd_len_safe = np.maximum(nd_len, 1e-12)
            nd_hat = nd_raw / nd_len_safe[:, :, None]

            nr_len = np.linalg.norm(nr, axis=-1)
            nr_len_safe = np.maximum(nr_len, 1e-12)
            nr_hat = nr / nr_len_safe[:, :, None]

            dots = np.einsum("hwc,hwc->hw", nr_hat, nd_hat)
            normal_term = w_n * float(np.where(mask, 1.0 - dots, 0.0).sum() / count)

            scale = -w_n / count
            g_nr_hat = scale * mask[:, :, None] * nd_hat
            proj = np.einsum("hwc,hwc->hw", g_nr_hat, nr_hat)
            d_normal = (g_nr_hat - proj[:, :, None] * nr_hat) / nr_len_safe[:, :, None]

            g_nd_hat = scale * mask[:, :, None] * nr_hat
            proj_d = np.einsum("hwc,hwc->hw", g_nd_hat, nd_hat)
            g_nd_raw = (g_nd_hat - proj_d[:, :, None] * nd_hat) / nd_len_safe[:, :, None]
            # nd_raw = (-gx, -gy, px_scale * depth)
            g_gx = -g_nd_raw[:, :, 0]
            g_gy = -g_nd_raw[:, :, 1]
            d_depth += px_scale * g_nd_raw[:, :, 2]
            d_depth[:, 2:] += 0.5 * g_gx[:, 1:-1]
            d_depth[:, :-2] -= 0.5 * g_gx[:, 1:-1]
            d_depth[2:, :] += 0.5 * g_gy[1:-1, :]
            d_depth[:-2, :] -= 0.5 * g_gy[1:-1, :]

    if config.smooth_loss_weight > 0.0 and rendered.attrs is not None:
        w_s = config.smooth_loss_weight
        ref_gray_dx, ref_gray_dy = _forward_diffs(np.abs(reference_rgb).mean(axis=2))
        ex = np.exp(-np.abs(ref_gray_dx))
        ey = np.exp(-np.abs(ref_gray_dy))
        attrs = rendered.attrs
        n_planes = attrs.shape[2]
        d_attrs = np.zeros_like(attrs)
        acc = 0.0
        n_terms = n_planes * (ex.size + ey.size)
        for p in range(n_planes):
            adx, ady = _forward_diffs(attrs[:, :, p])
            acc += float((np.abs(adx) * ex).sum() + (np.abs(ady) * ey).sum())
            gdx = w_s * np.sign(adx) * ex / n_terms
            gdy = w_s * np.sign(ady) * ey / n_terms
            d_attrs[:, 1:, p] += gdx
            d_attrs[:, :-1, p] -= gdx
            d_attrs[1:, :, p] += gdy
            d_attrs[:-1, :, p] -= gdy
        smooth_term = w_s * acc / n_terms

    total = total + normal_term + smooth_term
    grads = ImageGradients(rgb=d_rgb, alpha=None, depth=d_depth, normal=d_normal, attrs=d_attrs)
    return total, grads, LossBreakdown(total=total, l1=l1, ssim_term=ssim_term,
                                       normal=normal_term, smooth=smooth_term)
