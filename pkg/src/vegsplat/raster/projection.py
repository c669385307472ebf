"""EWA-style projection of 3D Gaussians to screen space.

The 3D covariance R S S^T R^T is pushed through the world-to-camera
rotation and the perspective Jacobian at the mean, giving a 2x2 screen
covariance; +dilation is added on the diagonal before inversion to the
conic used by the blender.  View-space x/z and y/z are clamped (3DGS
convention) when evaluating the Jacobian so far off-axis splats do not blow
up the linearization.

The per-splat integer pixel rectangle is sized from the exact alpha level
set: pixels outside it are guaranteed to fall below the 1/255 blending
skip, so the rectangle never changes the rendered result.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..camera import Camera
from ..model import GaussianSet
from .constants import DEFAULT_SETTINGS, RasterSettings


def quat_to_rotmat(q: np.ndarray) -> np.ndarray:
    """Unit quaternions (n, 4) as (w, x, y, z) -> rotation matrices (n, 3, 3)."""
    w, x, y, z = q[:, 0], q[:, 1], q[:, 2], q[:, 3]
    m = np.empty((len(q), 3, 3))
    m[:, 0, 0] = 1 - 2 * (y * y + z * z)
    m[:, 0, 1] = 2 * (x * y - w * z)
    m[:, 0, 2] = 2 * (x * z + w * y)
    m[:, 1, 0] = 2 * (x * y + w * z)
    m[:, 1, 1] = 1 - 2 * (x * x + z * z)
    m[:, 1, 2] = 2 * (y * z - w * x)
    m[:, 2, 0] = 2 * (x * z - w * y)
    m[:, 2, 1] = 2 * (y * z + w * x)
    m[:, 2, 2] = 1 - 2 * (x * x + y * y)
    return m


@dataclass
class ProjectResult:
    in_view: np.ndarray      # (n,) bool over the input subset
    mean2d: np.ndarray       # (m, 2) pixel coordinates of kept splats
    conic: np.ndarray        # (m, 3) packed inverse covariance (a, b, c)
    cov2d: np.ndarray        # (m, 3) packed covariance incl. dilation
    depth: np.ndarray        # (m,) camera-space z
    radius: np.ndarray       # (m,) 3-sigma radius in pixels
    rect: np.ndarray         # (m, 4) int32 pixel bounds x0, x1, y0, y1 (exclusive)
    # caches for the backward pass (all on the kept subset)
    t_cam: np.ndarray
    rot: np.ndarray          # (m, 3, 3) from normalized quaternions
    q_hat: np.ndarray
    q_norm: np.ndarray
    scale: np.ndarray        # (m, 3) activated scales
    sigma3d: np.ndarray      # (m, 3, 3)
    world_rot: np.ndarray    # (3, 3) camera rotation rows
    focal: float
    tx_clamped: np.ndarray
    ty_clamped: np.ndarray
    x_clamp_hit: np.ndarray
    y_clamp_hit: np.ndarray
    lim_x: float
    lim_y: float


def project(gs: GaussianSet, camera: Camera, index: np.ndarray | None = None,
            settings: RasterSettings = DEFAULT_SETTINGS,
            alpha_base: np.ndarray | None = None) -> ProjectResult:
    """Project the (optionally indexed) Gaussians; culls behind-near and
    off-screen splats.  alpha_base (same subset) tightens the pixel rect to
    the exact blending-skip level set."""
    sub = gs if index is None else gs.select(index)
    n = len(sub)
    cam_pos = np.asarray(camera.position, dtype=np.float64)
    world_rot = camera.world_to_cam_rotation()
    f = camera.focal_px

    t = (sub.position - cam_pos[None, :]) @ world_rot.T
    tz = t[:, 2]
    in_front = tz > camera.near

    tan_y = math.tan(0.5 * camera.fov_y)
    tan_x = tan_y * camera.aspect
    lim_x = settings.frustum_limit * tan_x
    lim_y = settings.frustum_limit * tan_y

    tz_safe = np.where(in_front, tz, 1.0)
    txz = t[:, 0] / tz_safe
    tyz = t[:, 1] / tz_safe
    x_hit = np.abs(txz) > lim_x
    y_hit = np.abs(tyz) > lim_y
    tx_c = np.clip(txz, -lim_x, lim_x) * tz
    ty_c = np.clip(tyz, -lim_y, lim_y) * tz

    px = 0.5 * camera.width + f * txz
    py = 0.5 * camera.height - f * tyz
    mean2d = np.stack([px, py], axis=1)

    q_norm = np.linalg.norm(sub.rotation, axis=1)
    q_hat = sub.rotation / np.maximum(q_norm, 1e-30)[:, None]
    rot = quat_to_rotmat(q_hat)
    scale = sub.scales()
    # Sigma = R diag(s^2) R^T
    rs = rot * (scale[:, None, :] ** 2)
    sigma3d = rs @ rot.transpose(0, 2, 1)

    # M = J W, J evaluated at the clamped view-space position
    inv_z = 1.0 / tz_safe
    inv_z2 = inv_z * inv_z
    j = np.zeros((n, 2, 3))
    j[:, 0, 0] = f * inv_z
    j[:, 0, 2] = -f * tx_c * inv_z2
    j[:, 1, 1] = -f * inv_z
    j[:, 1, 2] = f * ty_c * inv_z2
    m = j @ world_rot[None, :, :]
    cov = m @ sigma3d @ m.transpose(0, 2, 1)
    a = cov[:, 0, 0] + settings.dilation
    b = cov[:, 0, 1]
    c = cov[:, 1, 1] + settings.dilation

    det = a * c - b * b
    mid = 0.5 * (a + c)
    disc = np.sqrt(np.maximum(mid * mid - det, 0.0))
    lam_max = mid + disc
    radius = settings.radius_sigma * np.sqrt(np.maximum(lam_max, 0.0))

    inv_det = np.where(det > 0, 1.0 / np.where(det > 0, det, 1.0), 0.0)
    conic = np.stack([c * inv_det, -b * inv_det, a * inv_det], axis=1)

    # rectangle from the alpha_skip level set of the splat
    if alpha_base is None:
        ab = np.ones(n)
    else:
        ab = np.asarray(alpha_base, dtype=np.float64)
    ratio = np.maximum(ab, settings.alpha_skip) / settings.alpha_skip
    r_cut = np.sqrt(np.maximum(lam_max, 0.0) * 2.0 * np.log(ratio)) + settings.rect_margin_px

    x0 = np.ceil(px - r_cut - 0.5).astype(np.int64)
    x1 = np.floor(px + r_cut - 0.5).astype(np.int64) + 1
    y0 = np.ceil(py - r_cut - 0.5).astype(np.int64)
    y1 = np.floor(py + r_cut - 0.5).astype(np.int64) + 1
    x0 = np.clip(x0, 0, camera.width)
    x1 = np.clip(x1, 0, camera.width)
    y0 = np.clip(y0, 0, camera.height)
    y1 = np.clip(y1, 0, camera.height)

    keep = in_front & (det > 0) & (x1 > x0) & (y1 > y0) & np.isfinite(px) & np.isfinite(py)
    kidx = np.flatnonzero(keep)
    rect = np.stack([x0, x1, y0, y1], axis=1)[kidx].astype(np.int32)

    return ProjectResult(
        in_view=keep,
        mean2d=mean2d[kidx],
        conic=conic[kidx],
        cov2d=np.stack([a, b, c], axis=1)[kidx],
        depth=tz[kidx],
        radius=radius[kidx],
        rect=rect,
        t_cam=t[kidx],
        rot=rot[kidx],
        q_hat=q_hat[kidx],
        q_norm=q_norm[kidx],
        scale=scale[kidx],
        sigma3d=sigma3d[kidx],
        world_rot=world_rot,
        focal=f,
        tx_clamped=tx_c[kidx],
        ty_clamped=ty_c[kidx],
        x_clamp_hit=x_hit[kidx],
        y_clamp_hit=y_hit[kidx],
        lim_x=lim_x,
        lim_y=lim_y,
    )


@dataclass
class ProjectGradients:
    position: np.ndarray   # (m, 3)
    log_scale: np.ndarray  # (m, 3)
    rotation: np.ndarray   # (m, 4) raw (un-normalized) quaternion gradients


def project_backward(res: ProjectResult, d_mean2d: np.ndarray, d_conic: np.ndarray,
                     d_depth: np.ndarray) -> ProjectGradients:
    """Chain gradients of mean2d, packed conic (a, b, c) and depth back to
    position, log_scale and raw quaternion of the kept splats."""
    m = len(res.mean2d)
    f = res.focal
    tz = res.t_cam[:, 2]
    inv_z = 1.0 / tz
    inv_z2 = inv_z * inv_z

    # conic -> covariance: Lambda = Sigma^-1, dL/dSigma = -Lambda G Lambda
    g_conic = np.zeros((m, 2, 2))
    g_conic[:, 0, 0] = d_conic[:, 0]
    g_conic[:, 0, 1] = 0.5 * d_conic[:, 1]
    g_conic[:, 1, 0] = 0.5 * d_conic[:, 1]
    g_conic[:, 1, 1] = d_conic[:, 2]
    lam = np.zeros((m, 2, 2))
    lam[:, 0, 0] = res.conic[:, 0]
    lam[:, 0, 1] = res.conic[:, 1]
    lam[:, 1, 0] = res.conic[:, 1]
    lam[:, 1, 1] = res.conic[:, 2]
    g_cov = -lam @ g_conic @ lam  # full symmetric 2x2 gradient

    # covariance = M Sigma3 M^T (+ dilation,const): dL/dM = 2 G M Sigma3
    j = np.zeros((m, 2, 3))
    j[:, 0, 0] = f * inv_z
    j[:, 0, 2] = -f * res.tx_clamped * inv_z2
    j[:, 1, 1] = -f * inv_z
    j[:, 1, 2] = f * res.ty_clamped * inv_z2
    m_mat = j @ res.world_rot[None, :, :]
    g_m = 2.0 * (g_cov @ m_mat @ res.sigma3d)
    g_sigma3 = m_mat.transpose(0, 2, 1) @ g_cov @ m_mat

    # M = J W -> dL/dJ = dL/dM W^T
    g_j = g_m @ res.world_rot.T[None, :, :]

    # Jacobian entries -> view-space position
    g_tx = np.zeros(m)
    g_ty = np.zeros(m)
    g_tz = np.zeros(m)
    dx_dtx = np.where(res.x_clamp_hit, 0.0, 1.0)
    dy_dty = np.where(res.y_clamp_hit, 0.0, 1.0)
    # clamped coordinate follows lim * tz
    dx_dtz = np.where(res.x_clamp_hit, res.tx_clamped * inv_z, 0.0)
    dy_dtz = np.where(res.y_clamp_hit, res.ty_clamped * inv_z, 0.0)

    g_tx += g_j[:, 0, 2] * (-f * inv_z2) * dx_dtx
    g_ty += g_j[:, 1, 2] * (f * inv_z2) * dy_dty
    g_tz += g_j[:, 0, 0] * (-f * inv_z2)
    g_tz += g_j[:, 1, 1] * (f * inv_z2)
    g_tz += g_j[:, 0, 2] * (2.0 * f * res.tx_clamped * inv_z2 * inv_z - f * inv_z2 * dx_dtz)
    g_tz += g_j[:, 1, 2] * (-2.0 * f * res.ty_clamped * inv_z2 * inv_z + f * inv_z2 * dy_dtz)

    # screen mean: px = W/2 + f tx/tz, py = H/2 - f ty/tz (unclamped)
    tx, ty = res.t_cam[:, 0], res.t_cam[:, 1]
    g_tx += d_mean2d[:, 0] * f * inv_z
    g_tz += d_mean2d[:, 0] * (-f * tx * inv_z2)
    g_ty += d_mean2d[:, 1] * (-f * inv_z)
    g_tz += d_mean2d[:, 1] * (f * ty * inv_z2)

    g_tz += d_depth

    g_t = np.stack([g_tx, g_ty, g_tz], axis=1)
    position = g_t @ res.world_rot  # t = W (mu - cam): dL/dmu = W^T g_t

    # Sigma3 = R diag(s^2) R^T
    s2 = res.scale ** 2
    # dL/ds_k = 2 s_k r_k^T D r_k; log-scale chain multiplies by s_k
    r_d_r = np.einsum("nik,nij,njk->nk", res.rot, g_sigma3, res.rot)
    log_scale = 2.0 * s2 * r_d_r

    g_rot = 2.0 * g_sigma3 @ res.rot * s2[:, None, :]

    # rotation matrix -> quaternion (w, x, y, z), then through normalization
    w, x, y, z = res.q_hat[:, 0], res.q_hat[:, 1], res.q_hat[:, 2], res.q_hat[:, 3]
    g = g_rot
    gw = 2.0 * (-z * g[:, 0, 1] + y * g[:, 0, 2] + z * g[:, 1, 0]
                - x * g[:, 1, 2] - y * g[:, 2, 0] + x * g[:, 2, 1])
    gx = 2.0 * (y * g[:, 0, 1] + z * g[:, 0, 2] + y * g[:, 1, 0]
                - 2 * x * g[:, 1, 1] - w * g[:, 1, 2] + z * g[:, 2, 0]
                + w * g[:, 2, 1] - 2 * x * g[:, 2, 2])
    gy = 2.0 * (-2 * y * g[:, 0, 0] + x * g[:, 0, 1] + w * g[:, 0, 2]
                + x * g[:, 1, 0] + z * g[:, 1, 2] - w * g[:, 2, 0]
                + z * g[:, 2, 1] - 2 * y * g[:, 2, 2])
    gz = 2.0 * (-2 * z * g[:, 0, 0] - w * g[:, 0, 1] + x * g[:, 0, 2]
                + w * g[:, 1, 0] - 2 * z * g[:, 1, 1] + y * g[:, 1, 2]
                + x * g[:, 2, 0] + y * g[:, 2, 1])
    g_qhat = np.stack([gw, gx, gy, gz], axis=1)
    proj = np.einsum("ij,ij->i", g_qhat, res.q_hat)
    rotation = (g_qhat - proj[:, None] * res.q_hat) / np.maximum(res.q_norm, 1e-30)[:, None]

    return ProjectGradients(position=position, log_scale=log_scale, rotation=rotation)
