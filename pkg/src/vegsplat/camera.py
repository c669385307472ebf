"""Pinhole camera model, spherical orbit sampling and bounding-box zoom fit.

Conventions (shared by the raymarcher and the splat rasterizer):
  - view matrix is a right-handed look-at; the camera looks down -z in view
    space with +x right and +y up,
  - the projection matrix follows the OpenGL convention, NDC z in [-1, 1]
    with the near plane mapping to z = -1,
  - pixel coordinates are continuous with (0, 0) the top-left image corner
    and pixel centers at half-integers; the view axis hits
    (width/2, height/2).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace

import numpy as np


@dataclass(frozen=True)
class Camera:
    position: tuple[float, float, float]
    target: tuple[float, float, float]
    up: tuple[float, float, float] = (0.0, 1.0, 0.0)
    fov_y: float = math.radians(60.0)
    width: int = 800
    height: int = 800
    near: float = 0.01
    far: float = 1000.0

    def __post_init__(self):
        pos = np.asarray(self.position, dtype=np.float64)
        tgt = np.asarray(self.target, dtype=np.float64)
        up = np.asarray(self.up, dtype=np.float64)
        if not (0.0 < self.fov_y < math.pi):
            raise ValueError("fov_y must lie in (0, pi)")
        if self.width < 1 or self.height < 1:
            raise ValueError("resolution must be positive")
        if not (0.0 < self.near < self.far):
            raise ValueError("need 0 < near < far")
        fwd = tgt - pos
        dist = np.linalg.norm(fwd)
        if dist == 0.0:
            raise ValueError("camera position must differ from target")
        if np.linalg.norm(np.cross(fwd / dist, up / np.linalg.norm(up))) < 1e-9:
            raise ValueError("up vector is parallel to the view direction")

    @property
    def aspect(self) -> float:
        return self.width / self.height

    @property
    def focal_px(self) -> float:
        """Focal length in pixels (square pixels, so shared by both axes)."""
        return 0.5 * self.height / math.tan(0.5 * self.fov_y)

    def view_matrix(self) -> np.ndarray:
        pos = np.asarray(self.position, dtype=np.float64)
        fwd = np.asarray(self.target, dtype=np.float64) - pos
        fwd = fwd / np.linalg.norm(fwd)
        up = np.asarray(self.up, dtype=np.float64)
        right = np.cross(fwd, up)
        right = right / np.linalg.norm(right)
        true_up = np.cross(right, fwd)
        view = np.eye(4)
        view[0, :3] = right
        view[1, :3] = true_up
        view[2, :3] = -fwd
        view[:3, 3] = -view[:3, :3] @ pos
        return view

    def projection_matrix(self) -> np.ndarray:
        f = 1.0 / math.tan(0.5 * self.fov_y)
        n, fr = self.near, self.far
        proj = np.zeros((4, 4))
        proj[0, 0] = f / self.aspect
        proj[1, 1] = f
        proj[2, 2] = (fr + n) / (n - fr)
        proj[2, 3] = 2.0 * fr * n / (n - fr)
        proj[3, 2] = -1.0
        return proj

    def world_to_cam_rotation(self) -> np.ndarray:
        """Rows (right, up, forward); forward has positive depth in front."""
        view = self.view_matrix()
        rot = view[:3, :3].copy()
        rot[2] = -rot[2]
        return rot


def view_projection(camera: Camera) -> tuple[np.ndarray, np.ndarray]:
    return camera.view_matrix(), camera.projection_matrix()


def project_points(camera: Camera, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """World points (n, 3) -> pixel coordinates (n, 2) and NDC depth (n,).

    Points behind the camera get non-finite pixel coordinates.
    """
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    view, proj = view_projection(camera)
    hom = np.concatenate([points, np.ones((len(points), 1))], axis=1)
    clip = (proj @ view @ hom.T).T
    w = clip[:, 3]
    with np.errstate(divide="ignore", invalid="ignore"):
        ndc = clip[:, :3] / w[:, None]
        ndc[w <= 0] = np.nan
    px = (ndc[:, 0] + 1.0) * 0.5 * camera.width
    py = (1.0 - ndc[:, 1]) * 0.5 * camera.height
    return np.stack([px, py], axis=1), ndc[:, 2]


def unproject_point(camera: Camera, px: float, py: float, ndc_z: float) -> np.ndarray:
    """Inverse of project_points for a single pixel + NDC depth."""
    view, proj = view_projection(camera)
    ndc = np.array([2.0 * px / camera.width - 1.0, 1.0 - 2.0 * py / camera.height, ndc_z, 1.0])
    world = np.linalg.inv(proj @ view) @ ndc
    return world[:3] / world[3]


@dataclass(frozen=True)
class OrbitSpec:
    azimuth_count: int
    elevation_count: int
    radius: float
    center: tuple[float, float, float] = (0.0, 0.0, 0.0)
    elevation_range: tuple[float, float] = (math.radians(-72.0), math.radians(72.0))
    azimuth_offset: float = 0.0

    def __post_init__(self):
        if self.azimuth_count < 1 or self.elevation_count < 1:
            raise ValueError("orbit counts must be positive")
        if self.radius <= 0:
            raise ValueError("orbit radius must be positive")
        lo, hi = self.elevation_range
        if not (-math.pi / 2 < lo < hi < math.pi / 2):
            raise ValueError("elevation range must satisfy -pi/2 < lo < hi < pi/2")


def orbit_position(center, radius: float, azimuth: float, elevation: float) -> np.ndarray:
    c = np.asarray(center, dtype=np.float64)
    ce = math.cos(elevation)
    return c + radius * np.array([ce * math.cos(azimuth), math.sin(elevation), ce * math.sin(azimuth)])


def generate_orbit(spec: OrbitSpec, template: Camera) -> list[Camera]:
    """Elevation-major list of azimuth_count * elevation_count cameras."""
    lo, hi = spec.elevation_range
    if spec.elevation_count == 1:
        elevations = [0.5 * (lo + hi)]
    else:
        elevations = [lo + (hi - lo) * k / (spec.elevation_count - 1) for k in range(spec.elevation_count)]
    cams = []
    for el in elevations:
        for a in range(spec.azimuth_count):
            az = spec.azimuth_offset + 2.0 * math.pi * a / spec.azimuth_count
            pos = orbit_position(spec.center, spec.radius, az, el)
            cams.append(replace(template, position=tuple(pos), target=tuple(spec.center)))
    return cams


def _corners(bbox_min, bbox_max) -> np.ndarray:
    lo = np.asarray(bbox_min, dtype=np.float64)
    hi = np.asarray(bbox_max, dtype=np.float64)
    return np.array([[x, y, z] for x in (lo[0], hi[0]) for y in (lo[1], hi[1]) for z in (lo[2], hi[2])])


def _orbit_fits(corners, spec: OrbitSpec, template: Camera) -> bool:
    for cam in generate_orbit(spec, template):
        px, _ = project_points(cam, corners)
        if not np.all(np.isfinite(px)):
            return False
        if px[:, 0].min() < 0 or px[:, 0].max() > cam.width:
            return False
        if px[:, 1].min() < 0 or px[:, 1].max() > cam.height:
            return False
    return True


def fit_zoom(
    bbox_min,
    bbox_max,
    fov_y: float,
    aspect: float = 1.0,
    azimuth_count: int = 16,
    elevation_count: int = 10,
    elevation_range: tuple[float, float] = (math.radians(-72.0), math.radians(72.0)),
    tol_factor: float = 1e-4,
) -> float:
    """Smallest orbit radius keeping all bbox corners on screen.

    Starts from the bounding-sphere upper bound and bisects against the
    actual projections of the 8 corners over the full orbit.
    """
    lo = np.asarray(bbox_min, dtype=np.float64)
    hi = np.asarray(bbox_max, dtype=np.float64)
    if np.any(hi <= lo):
        raise ValueError("bounding box is degenerate")
    center = 0.5 * (lo + hi)
    sphere_r = 0.5 * float(np.linalg.norm(hi - lo))
    corners = _corners(lo, hi)

    tan_half = math.tan(0.5 * fov_y)
    tan_min = tan_half * min(1.0, aspect)
    # sphere fully inside the narrower half-angle from any orbit point
    upper = sphere_r / math.sin(math.atan(tan_min)) * 1.05 + sphere_r

    height = 256
    template = Camera(
        position=(0.0, 0.0, 1.0),
        target=tuple(center),
        fov_y=fov_y,
        width=max(1, int(round(height * aspect))),
        height=height,
        near=1e-3 * sphere_r,
        far=1e3 * sphere_r,
    )

    def fits(radius: float) -> bool:
        spec = OrbitSpec(azimuth_count, elevation_count, radius, tuple(center), elevation_range)
        return _orbit_fits(corners, spec, template)

    while not fits(upper):
        upper *= 1.5
    lower = sphere_r * 1e-3
    tol = tol_factor * sphere_r
    while upper - lower > tol:
        mid = 0.5 * (lower + upper)
        if fits(mid):
            upper = mid
        else:
            lower = mid
    return upper


def camera_to_dict(cam: Camera) -> dict:
    return {
        "position": list(cam.position),
        "target": list(cam.target),
        "up": list(cam.up),
        "fov_y": cam.fov_y,
        "width": cam.width,
        "height": cam.height,
        "near": cam.near,
        "far": cam.far,
    }


def camera_from_dict(d: dict) -> Camera:
    return Camera(
        position=tuple(d["position"]),
        target=tuple(d["target"]),
        up=tuple(d.get("up", (0.0, 1.0, 0.0))),
        fov_y=float(d["fov_y"]),
        width=int(d["width"]),
        height=int(d["height"]),
        near=float(d.get("near", 0.01)),
        far=float(d.get("far", 1000.0)),
    )


def save_cameras(cams: list[Camera], path) -> None:
    with open(path, "w") as f:
        json.dump([camera_to_dict(c) for c in cams], f, indent=1)


def load_cameras(path) -> list[Camera]:
    with open(path) as f:
        return [camera_from_dict(d) for d in json.load(f)]
