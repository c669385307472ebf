"""Ground-truth volume renderer: emission-absorption raymarching with
Blinn-Phong shading and a headlight at the camera.

Per pixel the ray accumulates samples front to back,
``P = sum_i c_i * a_i * prod_{j<i} (1 - a_j)``, with the transfer-function
opacity corrected for the step size so it reads as a per-cell opacity:
``a' = 1 - (1 - a)^(step/step_ref)`` where step_ref is the minimum cell
extent.  Rays terminate once transmittance drops below a threshold and the
remainder is composited over the background.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numba import njit, prange

from .camera import Camera, OrbitSpec, camera_to_dict, generate_orbit
from .images import ImageBuffer, write_pfm, write_png
from .transfer import TransferFunction, save_tf, tf_to_dict
from .volume import StructuredVolume, UnstructuredVolume, Volume


@dataclass(frozen=True)
class RaymarchConfig:
    step_size: float | None = None  # world units; defaults to step_ref / 2
    background: tuple[float, float, float] = (1.0, 1.0, 1.0)
    ambient: float = 0.3
    diffuse: float = 0.7
    specular: float = 0.2
    shininess: float = 32.0
    early_termination_T: float = 1e-4

    def __post_init__(self):
        if self.step_size is not None and self.step_size <= 0:
            raise ValueError("step_size must be positive")
        if not (0.0 <= self.early_termination_T < 1.0):
            raise ValueError("early_termination_T must lie in [0, 1)")

    def to_dict(self) -> dict:
        return {
            "step_size": self.step_size,
            "background": list(self.background),
            "ambient": self.ambient,
            "diffuse": self.diffuse,
            "specular": self.specular,
            "shininess": self.shininess,
            "early_termination_T": self.early_termination_T,
        }


def composite_front_to_back(colors, alphas, background):
    """Front-to-back accumulation with transmittance tracking."""
    out = np.zeros(3)
    t = 1.0
    for c, a in zip(colors, alphas):
        out += np.asarray(c, dtype=np.float64) * (a * t)
        t *= 1.0 - a
    return out + t * np.asarray(background, dtype=np.float64)


def ray_directions(camera: Camera) -> tuple[np.ndarray, np.ndarray]:
    """Camera origin and unit world-space ray direction per pixel (H, W, 3)."""
    h, w = camera.height, camera.width
    f = camera.focal_px
    px = (np.arange(w) + 0.5 - 0.5 * w) / f
    py = (0.5 * h - (np.arange(h) + 0.5)) / f
    xx, yy = np.meshgrid(px, py)
    dirs_cam = np.stack([xx, yy, np.ones_like(xx)], axis=-1)
    rot = camera.world_to_cam_rotation()  # rows right/up/forward
    dirs = dirs_cam @ rot
    dirs /= np.linalg.norm(dirs, axis=-1, keepdims=True)
    return np.asarray(camera.position, dtype=np.float64), dirs


@njit(cache=True, inline="always")
def _interp1(ts, vals, v):
    if v <= ts[0]:
        return vals[0]
    if v >= ts[-1]:
        return vals[-1]
    lo = 0
    hi = len(ts) - 1
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if ts[mid] <= v:
            lo = mid
        else:
            hi = mid
    u = (v - ts[lo]) / (ts[lo + 1] - ts[lo])
    return vals[lo] + u * (vals[lo + 1] - vals[lo])


@njit(cache=True, inline="always")
def _trilinear_clamped(values, nx, ny, nz, lx, ly, lz):
    # local coordinates in grid units, clamped to the domain
    if lx < 0.0:
        lx = 0.0
    if ly < 0.0:
        ly = 0.0
    if lz < 0.0:
        lz = 0.0
    if lx > nx - 1.0:
        lx = nx - 1.0
    if ly > ny - 1.0:
        ly = ny - 1.0
    if lz > nz - 1.0:
        lz = nz - 1.0
    ix = int(lx)
    iy = int(ly)
    iz = int(lz)
    if ix > nx - 2:
        ix = nx - 2
    if iy > ny - 2:
        iy = ny - 2
    if iz > nz - 2:
        iz = nz - 2
    fx = lx - ix
    fy = ly - iy
    fz = lz - iz
    base = ix + nx * (iy + ny * iz)
    v000 = values[base]
    v100 = values[base + 1]
    v010 = values[base + nx]
    v110 = values[base + nx + 1]
    v001 = values[base + nx * ny]
    v101 = values[base + nx * ny + 1]
    v011 = values[base + nx * ny + nx]
    v111 = values[base + nx * ny + nx + 1]
    c00 = v000 * (1 - fx) + v100 * fx
    c10 = v010 * (1 - fx) + v110 * fx
    c01 = v001 * (1 - fx) + v101 * fx
    c11 = v011 * (1 - fx) + v111 * fx
    return (c00 * (1 - fy) + c10 * fy) * (1 - fz) + (c01 * (1 - fy) + c11 * fy) * fz


@njit(cache=True, parallel=True)
def _raymarch_structured(
    values, nx, ny, nz, origin, spacing,
    cam_pos, dirs,
    op_ts, op_vals, col_ts, col_r, col_g, col_b,
    step, step_ref,
    bg, k_a, k_d, k_s, shininess, term_t,
    out_rgb, out_alpha,
):
    h, w = dirs.shape[0], dirs.shape[1]
    lo_x = origin[0]
    lo_y = origin[1]
    lo_z = origin[2]
    hi_x = lo_x + spacing[0] * (nx - 1)
    hi_y = lo_y + spacing[1] * (ny - 1)
    hi_z = lo_z + spacing[2] * (nz - 1)
    gx = spacing[0]
    gy = spacing[1]
    gz = spacing[2]
    for py in prange(h):
        for px in range(w):
            dx = dirs[py, px, 0]
            dy = dirs[py, px, 1]
            dz = dirs[py, px, 2]
            # slab intersection with the volume bounding box
            t0 = -1e30
            t1 = 1e30
            if abs(dx) > 1e-12:
                ta = (lo_x - cam_pos[0]) / dx
                tb = (hi_x - cam_pos[0]) / dx
                t0 = max(t0, min(ta, tb))
                t1 = min(t1, max(ta, tb))
            elif cam_pos[0] < lo_x or cam_pos[0] > hi_x:
                t1 = -1e30
            if abs(dy) > 1e-12:
                ta = (lo_y - cam_pos[1]) / dy
                tb = (hi_y - cam_pos[1]) / dy
                t0 = max(t0, min(ta, tb))
                t1 = min(t1, max(ta, tb))
            elif cam_pos[1] < lo_y or cam_pos[1] > hi_y:
                t1 = -1e30
            if abs(dz) > 1e-12:
                ta = (lo_z - cam_pos[2]) / dz
                tb = (hi_z - cam_pos[2]) / dz
                t0 = max(t0, min(ta, tb))
                t1 = min(t1, max(ta, tb))
            elif cam_pos[2] < lo_z or cam_pos[2] > hi_z:
                t1 = -1e30

            acc_r = 0.0
            acc_g = 0.0
            acc_b = 0.0
            trans = 1.0
            if t1 > max(t0, 0.0):
                t = max(t0, 0.0) + 0.5 * step
                ratio = step / step_ref
                while t < t1:
                    wx = cam_pos[0] + t * dx
                    wy = cam_pos[1] + t * dy
                    wz = cam_pos[2] + t * dz
                    lx = (wx - lo_x) / gx
                    ly = (wy - lo_y) / gy
                    lz = (wz - lo_z) / gz
                    v = _trilinear_clamped(values, nx, ny, nz, lx, ly, lz)
                    a_tf = _interp1(op_ts, op_vals, v)
                    a = 1.0 - (1.0 - a_tf) ** ratio
                    if a > 1e-12:
                        cr = _interp1(col_ts, col_r, v)
                        cg = _interp1(col_ts, col_g, v)
                        cb = _interp1(col_ts, col_b, v)
                        # field gradient by central differences (one cell)
                        gxv = (_trilinear_clamped(values, nx, ny, nz, lx + 1.0, ly, lz)
                               - _trilinear_clamped(values, nx, ny, nz, lx - 1.0, ly, lz)) / (2.0 * gx)
                        gyv = (_trilinear_clamped(values, nx, ny, nz, lx, ly + 1.0, lz)
                               - _trilinear_clamped(values, nx, ny, nz, lx, ly - 1.0, lz)) / (2.0 * gy)
                        gzv = (_trilinear_clamped(values, nx, ny, nz, lx, ly, lz + 1.0)
                               - _trilinear_clamped(values, nx, ny, nz, lx, ly, lz - 1.0)) / (2.0 * gz)
                        gnorm = math.sqrt(gxv * gxv + gyv * gyv + gzv * gzv)
                        ndotl = 0.0
                        if gnorm > 1e-12:
                            # normal = -grad / |grad|; headlight l = -ray dir
                            ndotl = abs((gxv * dx + gyv * dy + gzv * dz) / gnorm)
                        shade = k_a + k_d * ndotl
                        sr = cr * shade
                        sg = cg * shade
                        sb = cb * shade
                        if ndotl > 0.0:
                            spec = k_s * ndotl ** shininess
                            sr += spec
                            sg += spec
                            sb += spec
                        wgt = a * trans
                        acc_r += sr * wgt
                        acc_g += sg * wgt
                        acc_b += sb * wgt
                        trans *= 1.0 - a
                        if trans < term_t:
                            break
                    t += step
            out_rgb[py, px, 0] = acc_r + trans * bg[0]
            out_rgb[py, px, 1] = acc_g + trans * bg[1]
            out_rgb[py, px, 2] = acc_b + trans * bg[2]
            out_alpha[py, px] = 1.0 - trans


@njit(cache=True, inline="always")
def _tet_value(verts, vals, tets, cell_start, cell_tets, grid_lo, inv_cell, res, last_tet, wx, wy, wz):
    """Field value at a point, or (-1, found) when outside; returns (value, tet)."""
    # try the previously hit tet first (rays are coherent)
    for trial in range(2):
        if trial == 0:
            if last_tet < 0:
                continue
            lo_i = 0
            hi_i = 1
        else:
            cx = int((wx - grid_lo[0]) * inv_cell[0])
            cy = int((wy - grid_lo[1]) * inv_cell[1])
            cz = int((wz - grid_lo[2]) * inv_cell[2])
            if wx < grid_lo[0] or wy < grid_lo[1] or wz < grid_lo[2]:
                return -1.0, -1
            if cx >= res or cy >= res or cz >= res:
                # points exactly on the upper boundary land in the last cell
                if cx > res or cy > res or cz > res:
                    return -1.0, -1
                cx = min(cx, res - 1)
                cy = min(cy, res - 1)
                cz = min(cz, res - 1)
            cell = cx + res * (cy + res * cz)
            lo_i = cell_start[cell]
            hi_i = cell_start[cell + 1]
        for i in range(lo_i, hi_i):
            t = last_tet if trial == 0 else cell_tets[i]
            i0 = tets[t, 0]
            i1 = tets[t, 1]
            i2 = tets[t, 2]
            i3 = tets[t, 3]
            ax = verts[i0, 0]
            ay = verts[i0, 1]
            az = verts[i0, 2]
            e1x = verts[i1, 0] - ax
            e1y = verts[i1, 1] - ay
            e1z = verts[i1, 2] - az
            e2x = verts[i2, 0] - ax
            e2y = verts[i2, 1] - ay
            e2z = verts[i2, 2] - az
            e3x = verts[i3, 0] - ax
            e3y = verts[i3, 1] - ay
            e3z = verts[i3, 2] - az
            px = wx - ax
            py = wy - ay
            pz = wz - az
            det = (e1x * (e2y * e3z - e2z * e3y)
                   - e2x * (e1y * e3z - e1z * e3y)
                   + e3x * (e1y * e2z - e1z * e2y))
            if abs(det) < 1e-30:
                continue
            inv = 1.0 / det
            b1 = (px * (e2y * e3z - e2z * e3y)
                  - e2x * (py * e3z - pz * e3y)
                  + e3x * (py * e2z - pz * e2y)) * inv
            b2 = (e1x * (py * e3z - pz * e3y)
                  - px * (e1y * e3z - e1z * e3y)
                  + e3x * (e1y * pz - e1z * py)) * inv
            b3 = (e1x * (e2y * pz - e2z * py)
                  - e2x * (e1y * pz - e1z * py)
                  + px * (e1y * e2z - e1z * e2y)) * inv
            b0 = 1.0 - b1 - b2 - b3
            if b0 >= -1e-10 and b1 >= -1e-10 and b2 >= -1e-10 and b3 >= -1e-10:
                val = b0 * vals[i0] + b1 * vals[i1] + b2 * vals[i2] + b3 * vals[i3]
                return val, t
    return -1.0, -1


@njit(cache=True, parallel=True)
def _raymarch_unstructured(
    verts, vals, tets, cell_start, cell_tets, grid_lo, inv_cell, res,
    bbox_lo, bbox_hi,
    cam_pos, dirs,
    op_ts, op_vals, col_ts, col_r, col_g, col_b,
    step, step_ref, grad_h,
    bg, k_a, k_d, k_s, shininess, term_t,
    out_rgb, out_alpha,
):
    h, w = dirs.shape[0], dirs.shape[1]
    for py in prange(h):
        for px in range(w):
            dx = dirs[py, px, 0]
            dy = dirs[py, px, 1]
            dz = dirs[py, px, 2]
            t0 = -1e30
            t1 = 1e30
            for ax in range(3):
                d = dirs[py, px, ax]
                o = cam_pos[ax]
                if abs(d) > 1e-12:
                    ta = (bbox_lo[ax] - o) / d
                    tb = (bbox_hi[ax] - o) / d
                    t0 = max(t0, min(ta, tb))
                    t1 = min(t1, max(ta, tb))
                elif o < bbox_lo[ax] or o > bbox_hi[ax]:
                    t1 = -1e30

            acc_r = 0.0
            acc_g = 0.0
            acc_b = 0.0
            trans = 1.0
            last_tet = -1
            if t1 > max(t0, 0.0):
                t = max(t0, 0.0) + 0.5 * step
                ratio = step / step_ref
                while t < t1:
                    wx = cam_pos[0] + t * dx
                    wy = cam_pos[1] + t * dy
                    wz = cam_pos[2] + t * dz
                    v, last_tet = _tet_value(verts, vals, tets, cell_start, cell_tets,
                                             grid_lo, inv_cell, res, last_tet, wx, wy, wz)
                    if last_tet >= 0:
                        a_tf = _interp1(op_ts, op_vals, v)
                        a = 1.0 - (1.0 - a_tf) ** ratio
                        if a > 1e-12:
                            cr = _interp1(col_ts, col_r, v)
                            cg = _interp1(col_ts, col_g, v)
                            cb = _interp1(col_ts, col_b, v)
                            vpx, tp = _tet_value(verts, vals, tets, cell_start, cell_tets,
                                                 grid_lo, inv_cell, res, last_tet, wx + grad_h, wy, wz)
                            vmx, tm = _tet_value(verts, vals, tets, cell_start, cell_tets,
                                                 grid_lo, inv_cell, res, last_tet, wx - grad_h, wy, wz)
                            gxv = ((vpx if tp >= 0 else v) - (vmx if tm >= 0 else v)) / (2.0 * grad_h)
                            vpy, tp = _tet_value(verts, vals, tets, cell_start, cell_tets,
                                                 grid_lo, inv_cell, res, last_tet, wx, wy + grad_h, wz)
                            vmy, tm = _tet_value(verts, vals, tets, cell_start, cell_tets,
                                                 grid_lo, inv_cell, res, last_tet, wx, wy - grad_h, wz)
                            gyv = ((vpy if tp >= 0 else v) - (vmy if tm >= 0 else v)) / (2.0 * grad_h)
                            vpz, tp = _tet_value(verts, vals, tets, cell_start, cell_tets,
                                                 grid_lo, inv_cell, res, last_tet, wx, wy, wz + grad_h)
                            vmz, tm = _tet_value(verts, vals, tets, cell_start, cell_tets,
                                                 grid_lo, inv_cell, res, last_tet, wx, wy, wz - grad_h)
                            gzv = ((vpz if tp >= 0 else v) - (vmz if tm >= 0 else v)) / (2.0 * grad_h)
                            gnorm = math.sqrt(gxv * gxv + gyv * gyv + gzv * gzv)
                            ndotl = 0.0
                            if gnorm > 1e-12:
                                ndotl = abs((gxv * dx + gyv * dy + gzv * dz) / gnorm)
                            shade = k_a + k_d * ndotl
                            sr = cr * shade
                            sg = cg * shade
                            sb = cb * shade
                            if ndotl > 0.0:
                                spec = k_s * ndotl ** shininess
                                sr += spec
                                sg += spec
                                sb += spec
                            wgt = a * trans
                            acc_r += sr * wgt
                            acc_g += sg * wgt
                            acc_b += sb * wgt
                            trans *= 1.0 - a
                            if trans < term_t:
                                break
                    t += step
            out_rgb[py, px, 0] = acc_r + trans * bg[0]
            out_rgb[py, px, 1] = acc_g + trans * bg[1]
            out_rgb[py, px, 2] = acc_b + trans * bg[2]
            out_alpha[py, px] = 1.0 - trans


def raymarch(volume: Volume, tf: TransferFunction, camera: Camera,
             config: RaymarchConfig = RaymarchConfig()) -> ImageBuffer:
    """Render one reference image of the volume through the transfer function."""
    cam_pos, dirs = ray_directions(camera)
    step_ref = volume.min_cell_extent()
    step = config.step_size if config.step_size is not None else 0.5 * step_ref
    out_rgb = np.zeros((camera.height, camera.width, 3))
    out_alpha = np.zeros((camera.height, camera.width))
    op_ts = tf.opacity.ts
    op_vals = tf.opacity.values
    col_ts = tf.color.ts
    col = tf.color.values
    bg = np.asarray(config.background, dtype=np.float64)

    if isinstance(volume, StructuredVolume):
        _raymarch_structured(
            volume.values, volume.dims[0], volume.dims[1], volume.dims[2],
            np.asarray(volume.origin, dtype=np.float64), np.asarray(volume.spacing, dtype=np.float64),
            cam_pos, dirs,
            op_ts, op_vals, col_ts, col[:, 0].copy(), col[:, 1].copy(), col[:, 2].copy(),
            step, step_ref,
            bg, config.ambient, config.diffuse, config.specular, config.shininess,
            config.early_termination_T,
            out_rgb, out_alpha,
        )
    elif isinstance(volume, UnstructuredVolume):
        lo, hi = volume.bbox
        acc = volume.accel
        _raymarch_unstructured(
            volume.vertices, volume.values, volume.tets.astype(np.int64),
            acc.cell_start, acc.cell_tets.astype(np.int64),
            acc.bbox_min, acc.inv_cell, acc.res[0],
            lo, hi,
            cam_pos, dirs,
            op_ts, op_vals, col_ts, col[:, 0].copy(), col[:, 1].copy(), col[:, 2].copy(),
            step, step_ref, 0.5 * step_ref,
            bg, config.ambient, config.diffuse, config.specular, config.shininess,
            config.early_termination_T,
            out_rgb, out_alpha,
        )
    else:
        raise TypeError(f"unsupported volume type {type(volume)!r}")
    return ImageBuffer(rgb=out_rgb, alpha=out_alpha)


def field_normal(volume: Volume, point, h: float | None = None) -> np.ndarray | None:
    """Shading normal at a world point: normalized negative central-difference
    gradient of the field (the same estimate the raymarcher shades with).
    Returns None where the gradient vanishes or the point is outside."""
    from .volume import sample

    p = np.asarray(point, dtype=np.float64)
    if sample(volume, p) is None:
        return None
    if h is None:
        h = 0.5 * volume.min_cell_extent()
    grad = np.zeros(3)
    for ax in range(3):
        dp = np.zeros(3)
        dp[ax] = h
        vp = sample(volume, p + dp)
        vm = sample(volume, p - dp)
        center = sample(volume, p)
        vp = center if vp is None else vp
        vm = center if vm is None else vm
        grad[ax] = (vp - vm) / (2.0 * h)
    norm = np.linalg.norm(grad)
    if norm < 1e-12:
        return None
    return -grad / norm


def image_name(az: int, el: int, tf: int) -> str:
    return f"az{az:02d}_el{el:02d}_tf{tf:02d}"


def render_dataset(
    volume: Volume,
    tfs: list[TransferFunction],
    orbit: OrbitSpec,
    template: Camera,
    out_dir,
    config: RaymarchConfig = RaymarchConfig(),
    write_float: bool = False,
    descriptor: dict | None = None,
) -> dict:
    """Render one image per (camera, transfer function) and write a manifest."""
    if not tfs:
        raise ValueError("tf_list must not be empty")
    out_dir = Path(out_dir)
    (out_dir / "images").mkdir(parents=True, exist_ok=True)
    (out_dir / "tfs").mkdir(exist_ok=True)

    tf_paths = []
    for t, tf in enumerate(tfs):
        rel = f"tfs/tf_{t:03d}.json"
        save_tf(tf, out_dir / rel)
        tf_paths.append(rel)

    cameras = generate_orbit(orbit, template)
    entries = []
    for e in range(orbit.elevation_count):
        for a in range(orbit.azimuth_count):
            cam = cameras[e * orbit.azimuth_count + a]
            for t, tf in enumerate(tfs):
                img = raymarch(volume, tf, cam, config)
                name = image_name(a, e, t)
                rel_img = f"images/{name}.png"
                write_png(out_dir / rel_img, img.rgb)
                entry = {
                    "azimuth_index": a,
                    "elevation_index": e,
                    "tf_index": t,
                    "camera": camera_to_dict(cam),
                    "tf": tf_paths[t],
                    "image": rel_img,
                }
                if write_float:
                    rel_pfm = f"images/{name}.pfm"
                    write_pfm(out_dir / rel_pfm, img.rgb)
                    entry["image_float"] = rel_pfm
                entries.append(entry)

    manifest = {
        "type": "vegsplat-dataset",
        "orbit": {
            "azimuth_count": orbit.azimuth_count,
            "elevation_count": orbit.elevation_count,
            "radius": orbit.radius,
            "center": list(orbit.center),
            "elevation_range": list(orbit.elevation_range),
            "azimuth_offset": orbit.azimuth_offset,
        },
        "raymarch": config.to_dict(),
        "tfs": [tf_to_dict(tf) for tf in tfs],
        "images": entries,
    }
    if descriptor is not None:
        manifest["descriptor"] = descriptor
    with open(out_dir / "manifest.json", "w") as f:
        json.dump(manifest, f, indent=1, sort_keys=True)
    return manifest
