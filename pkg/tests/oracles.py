"""Independent reference implementations used to check the fast paths.

Everything here is deliberately written the slow, obvious way (brute-force
loops, direct formula evaluation) and must stay decoupled from the library
internals it is used to verify.
"""

from __future__ import annotations

import numpy as np


def central_difference(f, x0: np.ndarray, h: float = 1e-3) -> np.ndarray:
    """Central finite differences of scalar f over a flat parameter vector."""
    x0 = np.asarray(x0, dtype=np.float64)
    grad = np.zeros_like(x0)
    for i in range(x0.size):
        xp = x0.copy()
        xm = x0.copy()
        xp.flat[i] += h
        xm.flat[i] -= h
        grad.flat[i] = (f(xp) - f(xm)) / (2.0 * h)
    return grad


def brute_force_tet_sample(vertices, values, tets, p) -> float | None:
    """Lowest-index containing tet, solved per tet from scratch."""
    p = np.asarray(p, dtype=np.float64)
    for t in range(len(tets)):
        a, b, c, d = (vertices[tets[t][k]] for k in range(4))
        mat = np.stack([b - a, c - a, d - a], axis=1)
        try:
            w = np.linalg.solve(mat, p - a)
        except np.linalg.LinAlgError:
            continue
        bary = np.array([1.0 - w.sum(), w[0], w[1], w[2]])
        if np.all(bary >= -1e-10):
            return float(bary @ values[tets[t]])
    return None


def naive_splat_blend(
    order,
    mean2d,
    conic,
    alpha_base,
    channels,
    rects,
    width,
    height,
    background,
    alpha_clamp=0.99,
    alpha_skip=1.0 / 255.0,
    transmittance_stop=1e-4,
):
    """Per-pixel front-to-back over compositing with a global depth sort.

    No tiling: every pixel walks the full depth-sorted splat list (`order`,
    front first), applying the same constants as the tiled rasterizer --
    the per-splat pixel rectangle, the 0.99 alpha clamp, the 1/255 skip and
    the 1e-4 transmittance stop.  The per-splat arithmetic is vectorized
    with numpy but the compositing recurrence is the textbook scalar one.
    Returns (image (H, W, C), final transmittance (H, W)).
    """
    n_ch = channels.shape[1]
    img = np.zeros((height, width, n_ch))
    t_final = np.ones((height, width))
    mean_o = mean2d[order]
    conic_o = conic[order]
    ab_o = alpha_base[order]
    ch_o = channels[order]
    rect_o = rects[order]

    # every (pixel, splat) alpha up front; compositing stays a scalar
    # front-to-back recurrence per pixel
    xs = np.arange(width) + 0.5
    ys = np.arange(height) + 0.5
    dx = xs[None, :, None] - mean_o[None, None, :, 0]
    dy = ys[:, None, None] - mean_o[None, None, :, 1]
    power = -0.5 * (conic_o[:, 0] * dx * dx + conic_o[:, 2] * dy * dy) - conic_o[:, 1] * dx * dy
    alpha = np.minimum(ab_o * np.exp(power), alpha_clamp)
    inside = (
        (rect_o[:, 0] <= np.arange(width)[None, :, None]) & (np.arange(width)[None, :, None] < rect_o[:, 1])
        & (rect_o[:, 2] <= np.arange(height)[:, None, None]) & (np.arange(height)[:, None, None] < rect_o[:, 3])
    )
    usable = inside & (alpha >= alpha_skip)

    for py in range(height):
        for px in range(width):
            t = 1.0
            acc = np.zeros(n_ch)
            for s in np.flatnonzero(usable[py, px]):
                test_t = t * (1.0 - alpha[py, px, s])
                if test_t < transmittance_stop:
                    break
                acc += ch_o[s] * (alpha[py, px, s] * t)
                t = test_t
            img[py, px] = acc + t * background
            t_final[py, px] = t
    return img, t_final


def back_to_front_over(colors, alphas, background):
    """Classic back-to-front 'over' compositing of an ordered sample list."""
    out = np.asarray(background, dtype=np.float64).copy()
    for c, a in zip(reversed(colors), reversed(alphas)):
        out = a * np.asarray(c) + (1.0 - a) * out
    return out


def windowed_ssim(x, y, window, k1=0.01, k2=0.03):
    """Direct per-window SSIM mean over valid positions (no convolution)."""
    c1, c2 = k1 ** 2, k2 ** 2
    half = window.shape[0] // 2
    h, w = x.shape[:2]
    vals = []
    for cy in range(half, h - half):
        for cx in range(half, w - half):
            for ch in range(x.shape[2]):
                px = x[cy - half:cy + half + 1, cx - half:cx + half + 1, ch]
                py = y[cy - half:cy + half + 1, cx - half:cx + half + 1, ch]
                mx = (window * px).sum()
                my = (window * py).sum()
                sx = (window * px * px).sum() - mx * mx
                sy = (window * py * py).sum() - my * my
                sxy = (window * px * py).sum() - mx * my
                num = (2 * mx * my + c1) * (2 * sxy + c2)
                den = (mx * mx + my * my + c1) * (sx + sy + c2)
                vals.append(num / den)
    return float(np.mean(vals))
