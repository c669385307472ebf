"""Tile-parallel alpha-blending kernels.

The screen is cut into square tiles; each projected splat is duplicated
into every tile its pixel rectangle overlaps and instances are sorted by
(tile, depth).  Within a tile the kernels walk instances in depth order and
touch only the pixels of each instance's rectangle, carrying per-pixel
transmittance (and, backward, the suffix accumulators) in tile-local
buffers; a per-pixel done flag reproduces the front-to-back termination
rule exactly.  The backward kernel replays the blend back to front from the
stored final transmittance and last-contributor index.

Work is parallelized over tiles: a tile owns its pixels and its instance
gradient slots outright, so writes never race and results are bitwise
reproducible regardless of scheduling.  The kernels are dtype-generic;
training uses float32 and verification float64.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit, prange


@njit(cache=True, parallel=True, fastmath=True)
def blend_forward(
    tile_start, tile_end, tiles_x, tile_size,
    inst_mean2d, inst_conic, inst_alpha, inst_pmin, inst_rect, inst_channels,
    bg, width, height,
    alpha_clamp, trans_stop,
    out_img, out_t, out_last,
):
    n_tiles = tile_start.shape[0]
    n_ch = inst_channels.shape[1]
    one = inst_alpha.dtype.type(1.0)
    for tile in prange(n_tiles):
        ty = tile // tiles_x
        tx = tile - ty * tiles_x
        x_lo = tx * tile_size
        y_lo = ty * tile_size
        x_hi = min(x_lo + tile_size, width)
        y_hi = min(y_lo + tile_size, height)
        w_t = x_hi - x_lo
        h_t = y_hi - y_lo

        t_loc = np.empty((h_t, w_t), dtype=inst_alpha.dtype)
        done = np.zeros((h_t, w_t), dtype=np.bool_)
        for yy in range(h_t):
            for xx in range(w_t):
                t_loc[yy, xx] = one
                out_last[y_lo + yy, x_lo + xx] = -1
                for c in range(n_ch):
                    out_img[y_lo + yy, x_lo + xx, c] = 0.0

        for i in range(tile_start[tile], tile_end[tile]):
            rx0 = max(inst_rect[i, 0], x_lo)
            rx1 = min(inst_rect[i, 1], x_hi)
            ry0 = max(inst_rect[i, 2], y_lo)
            ry1 = min(inst_rect[i, 3], y_hi)
            if rx0 >= rx1 or ry0 >= ry1:
                continue
            ca = inst_conic[i, 0]
            cb = inst_conic[i, 1]
            cc = inst_conic[i, 2]
            mx = inst_mean2d[i, 0]
            my = inst_mean2d[i, 1]
            ab = inst_alpha[i]
            pm = inst_pmin[i]
            for py in range(ry0, ry1):
                yy = py - y_lo
                dy = py + 0.5 - my
                for px in range(rx0, rx1):
                    xx = px - x_lo
                    if done[yy, xx]:
                        continue
                    dx = px + 0.5 - mx
                    pw = -0.5 * (ca * dx * dx + cc * dy * dy) - cb * dx * dy
                    if pw < pm:
                        continue
                    alpha = ab * math.exp(pw)
                    if alpha > alpha_clamp:
                        alpha = alpha_clamp
                    t = t_loc[yy, xx]
                    test_t = t * (one - alpha)
                    if test_t < trans_stop:
                        done[yy, xx] = True
                        continue
                    wgt = alpha * t
                    for c in range(n_ch):
                        out_img[py, px, c] += inst_channels[i, c] * wgt
                    t_loc[yy, xx] = test_t
                    out_last[py, px] = i

        for yy in range(h_t):
            for xx in range(w_t):
                t = t_loc[yy, xx]
                for c in range(n_ch):
                    out_img[y_lo + yy, x_lo + xx, c] += t * bg[c]
                out_t[y_lo + yy, x_lo + xx] = t


@njit(cache=True, parallel=True, fastmath=True)
def blend_backward(
    tile_start, tile_end, tiles_x, tile_size,
    inst_mean2d, inst_conic, inst_alpha, inst_pmin, inst_rect, inst_channels,
    bg, width, height,
    alpha_clamp,
    out_t, out_last,
    d_img, d_alpha_plane,
    g_mean2d, g_conic, g_alpha, g_channels,
):
    n_tiles = tile_start.shape[0]
    n_ch = inst_channels.shape[1]
    one = inst_alpha.dtype.type(1.0)
    for tile in prange(n_tiles):
        ty = tile // tiles_x
        tx = tile - ty * tiles_x
        x_lo = tx * tile_size
        y_lo = ty * tile_size
        x_hi = min(x_lo + tile_size, width)
        y_hi = min(y_lo + tile_size, height)
        w_t = x_hi - x_lo
        h_t = y_hi - y_lo

        t_loc = np.empty((h_t, w_t), dtype=inst_alpha.dtype)
        suffix = np.zeros((h_t, w_t, n_ch), dtype=inst_alpha.dtype)
        gloc = np.empty((h_t, w_t, n_ch), dtype=inst_alpha.dtype)
        # per-pixel constant: (g . bg) T_N - a_pix T_N
        hterm = np.empty((h_t, w_t), dtype=inst_alpha.dtype)
        for yy in range(h_t):
            for xx in range(w_t):
                py = y_lo + yy
                px = x_lo + xx
                t_n = out_t[py, px]
                t_loc[yy, xx] = t_n
                gb = inst_alpha.dtype.type(0.0)
                for c in range(n_ch):
                    gc = d_img[py, px, c]
                    gloc[yy, xx, c] = gc
                    gb += gc * bg[c]
                hterm[yy, xx] = (gb - d_alpha_plane[py, px]) * t_n

        for i in range(tile_end[tile] - 1, tile_start[tile] - 1, -1):
            rx0 = max(inst_rect[i, 0], x_lo)
            rx1 = min(inst_rect[i, 1], x_hi)
            ry0 = max(inst_rect[i, 2], y_lo)
            ry1 = min(inst_rect[i, 3], y_hi)
            if rx0 >= rx1 or ry0 >= ry1:
                continue
            ca = inst_conic[i, 0]
            cb = inst_conic[i, 1]
            cc = inst_conic[i, 2]
            mx = inst_mean2d[i, 0]
            my = inst_mean2d[i, 1]
            ab = inst_alpha[i]
            pm = inst_pmin[i]
            acc_alpha = inst_alpha.dtype.type(0.0)
            acc_mx = inst_alpha.dtype.type(0.0)
            acc_my = inst_alpha.dtype.type(0.0)
            acc_ca = inst_alpha.dtype.type(0.0)
            acc_cb = inst_alpha.dtype.type(0.0)
            acc_cc = inst_alpha.dtype.type(0.0)
            for py in range(ry0, ry1):
                yy = py - y_lo
                dy = py + 0.5 - my
                for px in range(rx0, rx1):
                    if out_last[py, px] < i:
                        continue
                    xx = px - x_lo
                    dx = px + 0.5 - mx
                    pw = -0.5 * (ca * dx * dx + cc * dy * dy) - cb * dx * dy
                    if pw < pm:
                        continue
                    falloff = math.exp(pw)
                    alpha = ab * falloff
                    clamped = alpha > alpha_clamp
                    if clamped:
                        alpha = alpha_clamp
                    one_m = one - alpha
                    t_i = t_loc[yy, xx] / one_m
                    wgt = alpha * t_i

                    dot_ug = inst_alpha.dtype.type(0.0)
                    dot_sg = inst_alpha.dtype.type(0.0)
                    for c in range(n_ch):
                        gc = gloc[yy, xx, c]
                        u = inst_channels[i, c]
                        g_channels[i, c] += gc * wgt
                        dot_ug += u * gc
                        dot_sg += suffix[yy, xx, c] * gc
                        suffix[yy, xx, c] += u * wgt
                    if not clamped:
                        d_alpha = t_i * dot_ug - (dot_sg + hterm[yy, xx]) / one_m
                        acc_alpha += d_alpha * falloff
                        dpw = d_alpha * alpha
                        acc_mx += dpw * (ca * dx + cb * dy)
                        acc_my += dpw * (cc * dy + cb * dx)
                        acc_ca += dpw * (-0.5 * dx * dx)
                        acc_cb += dpw * (-dx * dy)
                        acc_cc += dpw * (-0.5 * dy * dy)
                    t_loc[yy, xx] = t_i
            g_alpha[i] = acc_alpha
            g_mean2d[i, 0] = acc_mx
            g_mean2d[i, 1] = acc_my
            g_conic[i, 0] = acc_ca
            g_conic[i, 1] = acc_cb
            g_conic[i, 2] = acc_cc
