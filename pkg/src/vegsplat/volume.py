"""Scalar volume fields: structured grids and tetrahedral meshes.

Values are min-max normalized to [0, 1] at load time (the original range is
kept in ``raw_range`` for display); constant fields normalize to all zeros.
Sampling interpolates trilinearly inside grid cells and barycentrically
inside tets, returning None outside the domain.  Volumes are immutable
after construction, so concurrent read-only sampling is safe.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError, FormatError

_DTYPES = {"u8": np.uint8, "u16": np.dtype("<u2"), "f32": np.dtype("<f4")}


def normalize_values(raw: np.ndarray) -> tuple[np.ndarray, tuple[float, float]]:
    raw = np.asarray(raw, dtype=np.float64)
    lo, hi = float(raw.min()), float(raw.max())
    if hi > lo:
        values = (raw - lo) / (hi - lo)
    else:
        values = np.zeros_like(raw)
    return values, (lo, hi)


@dataclass(frozen=True)
class StructuredVolume:
    dims: tuple[int, int, int]           # vertex counts per axis
    spacing: tuple[float, float, float]  # world units per cell
    origin: tuple[float, float, float]
    values: np.ndarray                   # flat, x-fastest, in [0, 1]
    raw_range: tuple[float, float]

    def __post_init__(self):
        if any(d < 2 for d in self.dims):
            raise ValueError("structured volume needs at least 2 vertices per axis")
        n = self.dims[0] * self.dims[1] * self.dims[2]
        if self.values.shape != (n,):
            raise ValueError(f"expected {n} values, got {self.values.shape}")

    @property
    def bbox(self) -> tuple[np.ndarray, np.ndarray]:
        lo = np.asarray(self.origin, dtype=np.float64)
        ext = (np.asarray(self.dims) - 1) * np.asarray(self.spacing)
        return lo, lo + ext

    def grid(self) -> np.ndarray:
        """Values as a (nx, ny, nz)-indexable array (view, x-fastest flat)."""
        nx, ny, nz = self.dims
        return self.values.reshape(nz, ny, nx).transpose(2, 1, 0)

    def vertex_positions(self) -> np.ndarray:
        nx, ny, nz = self.dims
        xs = self.origin[0] + self.spacing[0] * np.arange(nx)
        ys = self.origin[1] + self.spacing[1] * np.arange(ny)
        zs = self.origin[2] + self.spacing[2] * np.arange(nz)
        zz, yy, xx = np.meshgrid(zs, ys, xs, indexing="ij")
        return np.stack([xx.ravel(), yy.ravel(), zz.ravel()], axis=1)

    def min_cell_extent(self) -> float:
        return float(min(self.spacing))


@dataclass(frozen=True)
class TetAccel:
    """Uniform grid over a tet mesh: cell -> overlapping tet ids (CSR)."""

    res: tuple[int, int, int]
    bbox_min: np.ndarray
    inv_cell: np.ndarray
    cell_start: np.ndarray  # (res_x*res_y*res_z + 1,) int64
    cell_tets: np.ndarray   # int32 tet indices

    def cell_of(self, p: np.ndarray) -> int | None:
        idx = np.floor((p - self.bbox_min) * self.inv_cell).astype(np.int64)
        if np.any(idx < 0) or np.any(idx >= np.asarray(self.res)):
            return None
        return int(idx[0] + self.res[0] * (idx[1] + self.res[1] * idx[2]))

    def candidates(self, p: np.ndarray) -> np.ndarray:
        c = self.cell_of(p)
        if c is None:
            return np.empty(0, dtype=np.int32)
        return self.cell_tets[self.cell_start[c]:self.cell_start[c + 1]]


def _tet_volumes(vertices: np.ndarray, tets: np.ndarray) -> np.ndarray:
    a = vertices[tets[:, 0]]
    e1 = vertices[tets[:, 1]] - a
    e2 = vertices[tets[:, 2]] - a
    e3 = vertices[tets[:, 3]] - a
    return np.einsum("ij,ij->i", np.cross(e1, e2), e3) / 6.0


def build_tet_accel(vertices: np.ndarray, tets: np.ndarray) -> TetAccel:
    res = int(np.clip(math.ceil(len(tets) ** (1.0 / 3.0)), 4, 128))
    lo = vertices.min(axis=0)
    hi = vertices.max(axis=0)
    ext = np.maximum(hi - lo, 1e-12)
    inv_cell = res / ext
    tet_lo = np.floor((vertices[tets].min(axis=1) - lo) * inv_cell).astype(np.int64)
    tet_hi = np.floor((vertices[tets].max(axis=1) - lo) * inv_cell).astype(np.int64)
    tet_lo = np.clip(tet_lo, 0, res - 1)
    tet_hi = np.clip(tet_hi, 0, res - 1)

    spans = tet_hi - tet_lo + 1
    counts_per_tet = spans.prod(axis=1)
    total = int(counts_per_tet.sum())
    cell_ids = np.empty(total, dtype=np.int64)
    tet_ids = np.empty(total, dtype=np.int32)
    pos = 0
    for t in range(len(tets)):
        (x0, y0, z0), (x1, y1, z1) = tet_lo[t], tet_hi[t]
        xs = np.arange(x0, x1 + 1)
        ys = np.arange(y0, y1 + 1)
        zs = np.arange(z0, z1 + 1)
        zz, yy, xx = np.meshgrid(zs, ys, xs, indexing="ij")
        cids = (xx + res * (yy + res * zz)).ravel()
        cell_ids[pos:pos + cids.size] = cids
        tet_ids[pos:pos + cids.size] = t
        pos += cids.size

    order = np.lexsort((tet_ids, cell_ids))
    cell_ids = cell_ids[order]
    tet_ids = tet_ids[order]
    n_cells = res ** 3
    cell_start = np.zeros(n_cells + 1, dtype=np.int64)
    np.add.at(cell_start, cell_ids + 1, 1)
    np.cumsum(cell_start, out=cell_start)
    return TetAccel(
        res=(res, res, res),
        bbox_min=lo,
        inv_cell=inv_cell,
        cell_start=cell_start,
        cell_tets=tet_ids,
    )


@dataclass(frozen=True)
class UnstructuredVolume:
    vertices: np.ndarray  # (n, 3) float64
    values: np.ndarray    # (n,) in [0, 1]
    tets: np.ndarray      # (m, 4) int32
    raw_range: tuple[float, float]
    accel: TetAccel = field(repr=False, default=None)

    def __post_init__(self):
        if self.tets.min(initial=0) < 0 or self.tets.max(initial=0) >= len(self.vertices):
            raise DataError("tet vertex index out of range")
        vols = _tet_volumes(self.vertices, self.tets)
        if np.any(np.abs(vols) < 1e-14):
            bad = int(np.argmin(np.abs(vols)))
            raise DataError(f"degenerate (zero-volume) tet at index {bad}")
        if self.accel is None:
            object.__setattr__(self, "accel", build_tet_accel(self.vertices, self.tets))

    @property
    def bbox(self) -> tuple[np.ndarray, np.ndarray]:
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    def vertex_positions(self) -> np.ndarray:
        return self.vertices

    def min_cell_extent(self) -> float:
        # edge-length scale of the mean tet volume
        mean_vol = float(np.abs(_tet_volumes(self.vertices, self.tets)).mean())
        return (6.0 * mean_vol) ** (1.0 / 3.0)


Volume = StructuredVolume | UnstructuredVolume


# -- descriptor + raw loading -------------------------------------------------

def parse_descriptor(text: str) -> dict:
    out = {}
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise FormatError(f"bad descriptor line: {line!r}")
        key, val = (part.strip() for part in line.split("=", 1))
        out[key] = val
    missing = {"dims", "dtype"} - out.keys()
    if missing:
        raise FormatError(f"descriptor missing keys: {sorted(missing)}")
    return out


def load_structured(data_path, descriptor=None) -> StructuredVolume:
    """Load a raw binary grid described by a sidecar text descriptor.

    The descriptor (``<data>.txt`` next to the file by default) carries
    ``dims=X,Y,Z``, ``dtype=u8|u16|f32`` and optional ``spacing``/``origin``.
    """
    data_path = Path(data_path)
    if descriptor is None:
        descriptor = data_path.with_suffix(data_path.suffix + ".txt")
        if not descriptor.exists():
            descriptor = data_path.with_suffix(".txt")
    if isinstance(descriptor, (str, Path)):
        desc = parse_descriptor(Path(descriptor).read_text())
    else:
        desc = dict(descriptor)

    dims = tuple(int(x) for x in str(desc["dims"]).split(","))
    if len(dims) != 3 or any(d < 2 for d in dims):
        raise FormatError(f"bad dims {desc['dims']!r}")
    dtype_name = str(desc["dtype"]).strip()
    if dtype_name not in _DTYPES:
        raise FormatError(f"unsupported dtype {dtype_name!r} (want u8|u16|f32)")
    dtype = _DTYPES[dtype_name]
    spacing = tuple(float(x) for x in str(desc.get("spacing", "1,1,1")).split(","))
    origin = tuple(float(x) for x in str(desc.get("origin", "0,0,0")).split(","))

    n = dims[0] * dims[1] * dims[2]
    blob = data_path.read_bytes()
    expected = n * np.dtype(dtype).itemsize
    if len(blob) != expected:
        raise FormatError(f"{data_path}: file is {len(blob)} bytes, expected {expected} for dims {dims}")
    raw = np.frombuffer(blob, dtype=dtype).astype(np.float64)
    if not np.all(np.isfinite(raw)):
        raise DataError(f"{data_path}: non-finite values in volume")
    values, raw_range = normalize_values(raw)
    return StructuredVolume(dims=dims, spacing=spacing, origin=origin, values=values, raw_range=raw_range)


def save_structured(vol: StructuredVolume, data_path, dtype: str = "f32") -> None:
    data_path = Path(data_path)
    if dtype != "f32":
        raise ValueError("only f32 export is supported")
    data_path.write_bytes(vol.values.astype("<f4").tobytes())
    desc = (
        f"dims={vol.dims[0]},{vol.dims[1]},{vol.dims[2]}\n"
        f"dtype=f32\n"
        f"spacing={vol.spacing[0]},{vol.spacing[1]},{vol.spacing[2]}\n"
        f"origin={vol.origin[0]},{vol.origin[1]},{vol.origin[2]}\n"
    )
    data_path.with_suffix(data_path.suffix + ".txt").write_text(desc)


# -- tet mesh container (magic VTET) -----------------------------------------

_VTET_MAGIC = b"VTET"
_VTET_VERSION = 1


def save_unstructured(vol: UnstructuredVolume, path, raw_values: np.ndarray | None = None) -> None:
    vals = vol.values if raw_values is None else np.asarray(raw_values, dtype=np.float64)
    with open(path, "wb") as f:
        f.write(_VTET_MAGIC)
        f.write(struct.pack("<III", _VTET_VERSION, len(vol.vertices), len(vol.tets)))
        f.write(vol.vertices.astype("<f4").tobytes())
        f.write(vals.astype("<f4").tobytes())
        f.write(vol.tets.astype("<u4").tobytes())


def load_unstructured(path) -> UnstructuredVolume:
    blob = Path(path).read_bytes()
    if len(blob) < 16 or blob[:4] != _VTET_MAGIC:
        raise FormatError(f"{path}: not a VTET file")
    version, n_verts, n_tets = struct.unpack("<III", blob[4:16])
    if version != _VTET_VERSION:
        raise FormatError(f"{path}: unsupported VTET version {version}")
    need = 16 + n_verts * 12 + n_verts * 4 + n_tets * 16
    if len(blob) != need:
        raise FormatError(f"{path}: file is {len(blob)} bytes, expected {need}")
    off = 16
    verts = np.frombuffer(blob, dtype="<f4", count=n_verts * 3, offset=off).reshape(n_verts, 3).astype(np.float64)
    off += n_verts * 12
    raw = np.frombuffer(blob, dtype="<f4", count=n_verts, offset=off).astype(np.float64)
    off += n_verts * 4
    tets = np.frombuffer(blob, dtype="<u4", count=n_tets * 4, offset=off).reshape(n_tets, 4).astype(np.int64)
    if not np.all(np.isfinite(verts)) or not np.all(np.isfinite(raw)):
        raise DataError(f"{path}: non-finite vertex data")
    if n_tets and tets.max() >= n_verts:
        raise DataError(f"{path}: tet references vertex {tets.max()} of {n_verts}")
    values, raw_range = normalize_values(raw)
    return UnstructuredVolume(vertices=verts, values=values, tets=tets.astype(np.int32), raw_range=raw_range)


# -- sampling ------------------------------------------------------------------

def _trilinear(vol: StructuredVolume, p: np.ndarray) -> float | None:
    nx, ny, nz = vol.dims
    local = (p - np.asarray(vol.origin)) / np.asarray(vol.spacing)
    if np.any(local < 0) or local[0] > nx - 1 or local[1] > ny - 1 or local[2] > nz - 1:
        return None
    # boundary points resolve into the lowest-index containing cell
    ix = min(int(math.floor(local[0])), nx - 2)
    iy = min(int(math.floor(local[1])), ny - 2)
    iz = min(int(math.floor(local[2])), nz - 2)
    fx, fy, fz = local[0] - ix, local[1] - iy, local[2] - iz
    v = vol.values

    def at(i, j, k):
        return v[(i) + nx * ((j) + ny * (k))]

    c00 = at(ix, iy, iz) * (1 - fx) + at(ix + 1, iy, iz) * fx
    c10 = at(ix, iy + 1, iz) * (1 - fx) + at(ix + 1, iy + 1, iz) * fx
    c01 = at(ix, iy, iz + 1) * (1 - fx) + at(ix + 1, iy, iz + 1) * fx
    c11 = at(ix, iy + 1, iz + 1) * (1 - fx) + at(ix + 1, iy + 1, iz + 1) * fx
    return float((c00 * (1 - fy) + c10 * fy) * (1 - fz) + (c01 * (1 - fy) + c11 * fy) * fz)


_BARY_TOL = 1e-10


def tet_barycentric(vertices: np.ndarray, tet: np.ndarray, p: np.ndarray) -> np.ndarray | None:
    a = vertices[tet[0]]
    mat = np.stack([vertices[tet[1]] - a, vertices[tet[2]] - a, vertices[tet[3]] - a], axis=1)
    try:
        w = np.linalg.solve(mat, p - a)
    except np.linalg.LinAlgError:
        return None
    bary = np.array([1.0 - w.sum(), w[0], w[1], w[2]])
    if np.all(bary >= -_BARY_TOL):
        return bary
    return None


def locate_tet(vol: UnstructuredVolume, p: np.ndarray, brute_force: bool = False) -> tuple[int, np.ndarray] | None:
    """Containing tet and barycentric coords; lowest tet index wins ties."""
    if brute_force:
        cand = np.arange(len(vol.tets), dtype=np.int32)
    else:
        cand = np.sort(vol.accel.candidates(p))
    for t in cand:
        bary = tet_barycentric(vol.vertices, vol.tets[t], p)
        if bary is not None:
            return int(t), bary
    if not brute_force:
        lo, hi = vol.bbox
        if np.all(p >= lo) and np.all(p <= hi):
            return locate_tet(vol, p, brute_force=True)
    return None


def sample(vol: Volume, point) -> float | None:
    """Field value at a world point, or None outside the domain."""
    p = np.asarray(point, dtype=np.float64)
    if isinstance(vol, StructuredVolume):
        return _trilinear(vol, p)
    hit = locate_tet(vol, p)
    if hit is None:
        return None
    t, bary = hit
    return float(bary @ vol.values[vol.tets[t]])


# -- synthetic volumes ---------------------------------------------------------

def generate_synthetic(kind: str, dims, seed: int = 0, count: int = 3) -> StructuredVolume:
    """Deterministic test volumes: blobs, marschner_lobb, spherical_shells."""
    dims = tuple(int(d) for d in (dims if hasattr(dims, "__len__") else (dims,) * 3))
    if len(dims) == 1:
        dims = dims * 3
    if any(d < 8 for d in dims):
        raise ValueError(f"synthetic volume dims must be >= 8 per axis, got {dims}")
    nx, ny, nz = dims
    spacing = (2.0 / (nx - 1), 2.0 / (ny - 1), 2.0 / (nz - 1))
    origin = (-1.0, -1.0, -1.0)
    xs = np.linspace(-1.0, 1.0, nx)
    ys = np.linspace(-1.0, 1.0, ny)
    zs = np.linspace(-1.0, 1.0, nz)
    zz, yy, xx = np.meshgrid(zs, ys, xs, indexing="ij")

    if kind == "spherical_shells":
        # bands centered on an actual vertex so the peak value 1.0 is on-grid
        cx, cy, cz = xs[nx // 2], ys[ny // 2], zs[nz // 2]
        r = np.sqrt((xx - cx) ** 2 + (yy - cy) ** 2 + (zz - cz) ** 2)
        raw = 0.5 + 0.5 * np.cos(2.0 * math.pi * count * r)
    elif kind == "blobs":
        rng = np.random.default_rng(seed)
        raw = np.zeros_like(xx)
        for _ in range(count):
            c = rng.uniform(-0.6, 0.6, size=3)
            width = rng.uniform(0.15, 0.45)
            amp = rng.uniform(0.5, 1.0)
            d2 = (xx - c[0]) ** 2 + (yy - c[1]) ** 2 + (zz - c[2]) ** 2
            raw += amp * np.exp(-d2 / (2.0 * width ** 2))
    elif kind == "marschner_lobb":
        alpha, f_m = 0.25, 6.0
        rr = np.sqrt(xx ** 2 + yy ** 2)
        rho = np.cos(2.0 * math.pi * f_m * np.cos(math.pi * rr / 2.0))
        raw = (1.0 - np.sin(math.pi * zz / 2.0) + alpha * (1.0 + rho)) / (2.0 * (1.0 + alpha))
    else:
        raise ValueError(f"unknown synthetic volume kind {kind!r}")

    values, raw_range = normalize_values(raw.ravel())
    return StructuredVolume(dims=dims, spacing=spacing, origin=origin, values=values, raw_range=raw_range)
