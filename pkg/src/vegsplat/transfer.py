"""Piecewise-linear transfer functions: color maps, opacity maps and the
ramped opacity-map families used to weight every part of the value range
equally during training.

Maps are defined by ordered control points on [0, 1] with required endpoints
at t=0 and t=1.  Evaluation clamps the query to [0, 1] and interpolates
linearly; derivatives use the half-open segment convention [t_k, t_{k+1})
so the subgradient at a knot is deterministic.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

_KNOT_EPS = 1e-9


def _validate_knots(ts: np.ndarray, what: str) -> None:
    if ts.size < 2:
        raise ValueError(f"{what} needs at least 2 control points")
    if abs(ts[0]) > _KNOT_EPS or abs(ts[-1] - 1.0) > _KNOT_EPS:
        raise ValueError(f"{what} must have control points at t=0 and t=1")
    if np.any(np.diff(ts) <= 0):
        raise ValueError(f"{what} control points must be strictly increasing in t")


@dataclass(frozen=True)
class OpacityMap:
    """Piecewise-linear opacity over the normalized value range."""

    points: tuple[tuple[float, float], ...]

    def __post_init__(self):
        ts = np.array([p[0] for p in self.points], dtype=np.float64)
        alphas = np.array([p[1] for p in self.points], dtype=np.float64)
        _validate_knots(ts, "opacity map")
        if np.any(alphas < -_KNOT_EPS) or np.any(alphas > 1.0 + _KNOT_EPS):
            raise ValueError("opacity values must lie in [0, 1]")
        object.__setattr__(self, "_ts", ts)
        object.__setattr__(self, "_vals", alphas)

    @property
    def ts(self) -> np.ndarray:
        return self._ts

    @property
    def values(self) -> np.ndarray:
        return self._vals

    def __call__(self, v):
        return eval_opacity(self, v)


@dataclass(frozen=True)
class ColorMap:
    """Piecewise-linear RGB color over the normalized value range."""

    points: tuple[tuple[float, float, float, float], ...]
    name: str | None = None

    def __post_init__(self):
        ts = np.array([p[0] for p in self.points], dtype=np.float64)
        rgb = np.array([p[1:] for p in self.points], dtype=np.float64)
        _validate_knots(ts, "color map")
        if rgb.shape[1] != 3 or np.any(rgb < -_KNOT_EPS) or np.any(rgb > 1.0 + _KNOT_EPS):
            raise ValueError("color values must be rgb triples in [0, 1]")
        object.__setattr__(self, "_ts", ts)
        object.__setattr__(self, "_vals", rgb)

    @property
    def ts(self) -> np.ndarray:
        return self._ts

    @property
    def values(self) -> np.ndarray:
        return self._vals

    def __call__(self, v):
        return eval_color(self, v)


@dataclass(frozen=True)
class TransferFunction:
    color: ColorMap
    opacity: OpacityMap


def eval_opacity(opacity: OpacityMap, v):
    """Interpolated opacity at v (scalar or array), v clamped to [0, 1]."""
    v = np.clip(v, 0.0, 1.0)
    return np.interp(v, opacity.ts, opacity.values)


def eval_color(color: ColorMap, v):
    """Interpolated rgb at v; returns shape (..., 3)."""
    v = np.clip(np.asarray(v, dtype=np.float64), 0.0, 1.0)
    out = np.empty(v.shape + (3,), dtype=np.float64)
    for c in range(3):
        out[..., c] = np.interp(v, color.ts, color.values[:, c])
    return out


def _segment_slopes(ts: np.ndarray, vals: np.ndarray) -> np.ndarray:
    return np.diff(vals, axis=0) / np.diff(ts)[(...,) + (None,) * (vals.ndim - 1)]


def _segment_index(ts: np.ndarray, v: np.ndarray) -> np.ndarray:
    # half-open [t_k, t_{k+1}); queries at t=1 fall in the last segment
    idx = np.searchsorted(ts, v, side="right") - 1
    return np.clip(idx, 0, len(ts) - 2)


def d_opacity_dv(opacity: OpacityMap, v):
    """Slope of the segment containing v (half-open convention)."""
    v = np.clip(np.asarray(v, dtype=np.float64), 0.0, 1.0)
    slopes = _segment_slopes(opacity.ts, opacity.values)
    return slopes[_segment_index(opacity.ts, v)]


def d_color_dv(color: ColorMap, v):
    """Per-channel slope of the segment containing v; shape (..., 3)."""
    v = np.clip(np.asarray(v, dtype=np.float64), 0.0, 1.0)
    slopes = _segment_slopes(color.ts, color.values)
    return slopes[_segment_index(color.ts, v)]


def _dedupe(points: list[tuple[float, float]]) -> tuple[tuple[float, float], ...]:
    out: list[tuple[float, float]] = []
    for t, a in points:
        t = min(max(t, 0.0), 1.0)
        if out and abs(t - out[-1][0]) <= _KNOT_EPS:
            continue
        out.append((t, a))
    return tuple(out)


def make_training_opacity_maps(steps: int) -> list[OpacityMap]:
    """Family of ramped opacity maps partitioning the value range.

    Map k peaks at c_k = (k + 0.5)/steps and falls off linearly with slope
    `steps` on either side; the first and last maps are extended flat at 1
    out to the range boundaries so the family sums to exactly 1 everywhere.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    s = float(steps)
    maps = []
    for k in range(steps):
        c = (k + 0.5) / s
        pts: list[tuple[float, float]] = []
        if k == 0:
            pts.append((0.0, 1.0))
        else:
            pts.append((0.0, 0.0))
            pts.append((c - 1.0 / s, 0.0))
        pts.append((c, 1.0))
        if k == steps - 1:
            pts.append((1.0, 1.0))
        else:
            pts.append((c + 1.0 / s, 0.0))
            pts.append((1.0, 0.0))
        maps.append(OpacityMap(_dedupe(pts)))
    return maps


def make_scaled_opacity_maps(steps: int, slope_factor: float) -> list[OpacityMap]:
    """Training family at a scaled slope: 0.5 broadens, 2.0 narrows."""
    if slope_factor <= 0:
        raise ValueError("slope_factor must be positive")
    scaled = int(round(steps * slope_factor))
    if scaled < 1:
        raise ValueError(f"steps*slope_factor rounds to {scaled}; need >= 1")
    return make_training_opacity_maps(scaled)


def linear_opacity_map() -> OpacityMap:
    """Single linear ramp from transparent to opaque."""
    return OpacityMap(((0.0, 0.0), (1.0, 1.0)))


def tf_to_dict(tf: TransferFunction) -> dict:
    return {
        "color": [[t, r, g, b] for t, r, g, b in tf.color.points],
        "opacity": [[t, a] for t, a in tf.opacity.points],
    }


def tf_from_dict(d: dict) -> TransferFunction:
    color = ColorMap(tuple((float(t), float(r), float(g), float(b)) for t, r, g, b in d["color"]))
    opacity = OpacityMap(tuple((float(t), float(a)) for t, a in d["opacity"]))
    return TransferFunction(color=color, opacity=opacity)


def save_tf(tf: TransferFunction, path) -> None:
    with open(path, "w") as f:
        json.dump(tf_to_dict(tf), f)


def load_tf(path) -> TransferFunction:
    with open(path) as f:
        return tf_from_dict(json.load(f))
