"""Gaussian model storage: structure-of-arrays parameters with activations,
initialization from volume vertices or random points, file serialization and
vector-quantized compression.

Raw (stored) parameters map to rendering quantities through fixed
activations: exp for scales, sigmoid for value/weight/lighting coefficients,
exp clamped to [1, 128] for the specular exponent, and normalization at use
for quaternions and normals.
"""

from __future__ import annotations

import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

from .errors import FormatError

log = logging.getLogger(__name__)

BETA_MIN, BETA_MAX = 1.0, 128.0

# serialized field order; all per-Gaussian scalars are little-endian f32
FIELD_LAYOUT = (
    ("position", 3),
    ("log_scale", 3),
    ("rotation", 4),
    ("raw_value", 1),
    ("raw_weight", 1),
    ("normal", 3),
    ("raw_ka", 1),
    ("raw_kd", 1),
    ("raw_ks", 1),
    ("raw_beta", 1),
)
FLOATS_PER_GAUSSIAN = sum(n for _, n in FIELD_LAYOUT)  # 19
ATTRIBUTE_DIM = FLOATS_PER_GAUSSIAN - 3  # everything but position

_MAGIC = b"VEGS"
_VERSION = 1
_HEADER_BYTES = 64
_FLAG_VQ = 1


def sigmoid(x):
    return 1.0 / (1.0 + np.exp(-np.asarray(x, dtype=np.float64)))


def logit(p):
    p = np.asarray(p, dtype=np.float64)
    return np.log(p) - np.log1p(-p)


def activate_beta(raw):
    return np.clip(np.exp(np.asarray(raw, dtype=np.float64)), BETA_MIN, BETA_MAX)


@dataclass
class GaussianSet:
    position: np.ndarray    # (n, 3)
    log_scale: np.ndarray   # (n, 3)
    rotation: np.ndarray    # (n, 4) quaternion (w, x, y, z), normalized at use
    raw_value: np.ndarray   # (n,) sigmoid -> scalar field value
    raw_weight: np.ndarray  # (n,) sigmoid -> blending weight
    normal: np.ndarray      # (n, 3) normalized at use
    raw_ka: np.ndarray      # (n,) sigmoid -> ambient coefficient
    raw_kd: np.ndarray      # (n,)
    raw_ks: np.ndarray      # (n,)
    raw_beta: np.ndarray    # (n,) exp clamped to [1, 128] -> shininess

    def __post_init__(self):
        n = len(self.position)
        for name, width in FIELD_LAYOUT:
            arr = getattr(self, name)
            want = (n,) if width == 1 else (n, width)
            if arr.shape != want:
                raise ValueError(f"{name}: expected shape {want}, got {arr.shape}")

    def __len__(self) -> int:
        return len(self.position)

    # -- activated views -------------------------------------------------
    def values(self) -> np.ndarray:
        return sigmoid(self.raw_value)

    def weights(self) -> np.ndarray:
        return sigmoid(self.raw_weight)

    def scales(self) -> np.ndarray:
        return np.exp(self.log_scale)

    def ka(self) -> np.ndarray:
        return sigmoid(self.raw_ka)

    def kd(self) -> np.ndarray:
        return sigmoid(self.raw_kd)

    def ks(self) -> np.ndarray:
        return sigmoid(self.raw_ks)

    def beta(self) -> np.ndarray:
        return activate_beta(self.raw_beta)

    def unit_quaternions(self) -> np.ndarray:
        norms = np.linalg.norm(self.rotation, axis=1, keepdims=True)
        return self.rotation / norms

    def field_names(self) -> list[str]:
        return [name for name, _ in FIELD_LAYOUT]

    def arrays(self) -> dict[str, np.ndarray]:
        return {name: getattr(self, name) for name, _ in FIELD_LAYOUT}

    def copy(self) -> "GaussianSet":
        return GaussianSet(**{k: v.copy() for k, v in self.arrays().items()})

    def select(self, index) -> "GaussianSet":
        return GaussianSet(**{k: v[index].copy() for k, v in self.arrays().items()})

    def bbox(self) -> tuple[np.ndarray, np.ndarray]:
        if len(self) == 0:
            return np.zeros(3), np.zeros(3)
        return self.position.min(axis=0), self.position.max(axis=0)

    @staticmethod
    def concatenate(parts: list["GaussianSet"]) -> "GaussianSet":
        names = [name for name, _ in FIELD_LAYOUT]
        return GaussianSet(**{k: np.concatenate([getattr(p, k) for p in parts]) for k in names})

    def attribute_matrix(self) -> np.ndarray:
        """Non-positional attributes packed as an (n, 16) matrix."""
        cols = []
        for name, width in FIELD_LAYOUT:
            if name == "position":
                continue
            arr = getattr(self, name)
            cols.append(arr.reshape(len(self), -1))
        return np.concatenate(cols, axis=1)

    @staticmethod
    def from_attribute_matrix(position: np.ndarray, attrs: np.ndarray) -> "GaussianSet":
        fields = {"position": position.copy()}
        off = 0
        for name, width in FIELD_LAYOUT:
            if name == "position":
                continue
            chunk = attrs[:, off:off + width]
            fields[name] = chunk.copy() if width > 1 else chunk[:, 0].copy()
            off += width
        return GaussianSet(**fields)


def _knn_scale(position: np.ndarray, k: int = 3) -> np.ndarray:
    """log of the mean distance to the k nearest selected neighbors."""
    n = len(position)
    if n == 1:
        return np.zeros((1, 3))
    kk = min(k, n - 1)
    tree = cKDTree(position)
    dists, _ = tree.query(position, k=kk + 1)
    mean_d = np.maximum(dists[:, 1:].mean(axis=1), 1e-9)
    return np.repeat(np.log(mean_d)[:, None], 3, axis=1)


def _common_init(position: np.ndarray, values: np.ndarray, rng: np.random.Generator) -> GaussianSet:
    n = len(position)
    clipped = np.clip(values, 1e-4, 1.0 - 1e-4)
    rotation = np.zeros((n, 4))
    rotation[:, 0] = 1.0
    normal = rng.normal(size=(n, 3))
    normal /= np.linalg.norm(normal, axis=1, keepdims=True)
    return GaussianSet(
        position=position.astype(np.float64),
        log_scale=_knn_scale(position),
        rotation=rotation,
        raw_value=logit(clipped),
        raw_weight=np.full(n, float(logit(0.1))),
        normal=normal,
        raw_ka=np.zeros(n),  # logit(0.5)
        raw_kd=np.zeros(n),
        raw_ks=np.zeros(n),
        raw_beta=np.full(n, float(np.log(8.0))),
    )


def init_from_volume(volume, n_points: int, seed: int = 0) -> GaussianSet:
    """Random subset of the volume's scalar-valued vertices as Gaussians."""
    if n_points < 1:
        raise ValueError("n_points must be >= 1")
    positions = volume.vertex_positions()
    values = volume.values
    n_avail = len(positions)
    if n_points > n_avail:
        log.warning("requested %d init points but volume has %d vertices; clamping", n_points, n_avail)
        n_points = n_avail
    rng = np.random.default_rng(seed)
    idx = rng.choice(n_avail, size=n_points, replace=False)
    idx.sort()
    return _common_init(positions[idx], values[idx], rng)


def init_random(bbox_min, bbox_max, n_points: int, seed: int = 0) -> GaussianSet:
    """Uniform random positions and values inside a bounding box."""
    if n_points < 1:
        raise ValueError("n_points must be >= 1")
    rng = np.random.default_rng(seed)
    lo = np.asarray(bbox_min, dtype=np.float64)
    hi = np.asarray(bbox_max, dtype=np.float64)
    position = rng.uniform(lo, hi, size=(n_points, 3))
    values = rng.uniform(0.05, 0.95, size=n_points)
    return _common_init(position, values, rng)


# -- serialization -------------------------------------------------------------

def _pack_header(count: int, flags: int, bbox_lo: np.ndarray, bbox_hi: np.ndarray) -> bytes:
    head = _MAGIC + struct.pack("<III", _VERSION, count, flags)
    head += struct.pack("<6f", *bbox_lo, *bbox_hi)
    return head.ljust(_HEADER_BYTES, b"\0")


def _unpack_header(blob: bytes) -> tuple[int, int, np.ndarray]:
    if len(blob) < _HEADER_BYTES or blob[:4] != _MAGIC:
        raise FormatError("not a VEGS model file")
    version, count, flags = struct.unpack("<III", blob[4:16])
    if version != _VERSION:
        raise FormatError(f"unsupported model version {version}")
    bbox = np.array(struct.unpack("<6f", blob[16:40]))
    return count, flags, bbox


def save_model(gs: GaussianSet, path) -> None:
    """Uncompressed model: 64-byte header + n * 19 little-endian f32."""
    lo, hi = gs.bbox()
    out = bytearray(_pack_header(len(gs), 0, lo, hi))
    for name, width in FIELD_LAYOUT:
        out += getattr(gs, name).astype("<f4").tobytes()
    Path(path).write_bytes(bytes(out))


def model_file_size(n: int) -> int:
    return _HEADER_BYTES + n * FLOATS_PER_GAUSSIAN * 4


@dataclass
class VqModel:
    """Positions kept exact; all other attributes quantized to a codebook."""

    position: np.ndarray  # (n, 3)
    codebook: np.ndarray  # (K, 16)
    indices: np.ndarray   # (n,) uint32

    def __post_init__(self):
        if self.codebook.shape[1] != ATTRIBUTE_DIM:
            raise ValueError(f"codebook must have {ATTRIBUTE_DIM} columns")
        if len(self.indices) != len(self.position):
            raise ValueError("indices length mismatches positions")
        if len(self.indices) and self.indices.max() >= len(self.codebook):
            raise ValueError("codebook index out of range")

    def __len__(self) -> int:
        return len(self.position)


def save_vq_model(vq: VqModel, path) -> None:
    lo = vq.position.min(axis=0) if len(vq) else np.zeros(3)
    hi = vq.position.max(axis=0) if len(vq) else np.zeros(3)
    out = bytearray(_pack_header(len(vq), _FLAG_VQ, lo, hi))
    out += vq.position.astype("<f4").tobytes()
    out += struct.pack("<I", len(vq.codebook))
    out += vq.codebook.astype("<f4").tobytes()
    out += vq.indices.astype("<u4").tobytes()
    Path(path).write_bytes(bytes(out))


def load_model(path) -> GaussianSet:
    """Load a model file; VQ payloads are decompressed transparently."""
    raw = load_model_raw(path)
    return vq_decompress(raw) if isinstance(raw, VqModel) else raw


def load_model_raw(path) -> GaussianSet | VqModel:
    blob = Path(path).read_bytes()
    count, flags, _ = _unpack_header(blob)
    off = _HEADER_BYTES
    if flags & _FLAG_VQ:
        need = off + count * 12 + 4
        if len(blob) < need:
            raise FormatError(f"{path}: truncated VQ model file")
        position = np.frombuffer(blob, dtype="<f4", count=count * 3, offset=off).reshape(count, 3).astype(np.float64)
        off += count * 12
        (k,) = struct.unpack_from("<I", blob, off)
        off += 4
        need = off + k * ATTRIBUTE_DIM * 4 + count * 4
        if len(blob) != need:
            raise FormatError(f"{path}: VQ model file is {len(blob)} bytes, expected {need}")
        codebook = np.frombuffer(blob, dtype="<f4", count=k * ATTRIBUTE_DIM, offset=off)
        codebook = codebook.reshape(k, ATTRIBUTE_DIM).astype(np.float64)
        off += k * ATTRIBUTE_DIM * 4
        indices = np.frombuffer(blob, dtype="<u4", count=count, offset=off).copy()
        return VqModel(position=position, codebook=codebook, indices=indices)

    if len(blob) != model_file_size(count):
        raise FormatError(f"{path}: model file is {len(blob)} bytes, expected {model_file_size(count)}")
    fields = {}
    for name, width in FIELD_LAYOUT:
        arr = np.frombuffer(blob, dtype="<f4", count=count * width, offset=off).astype(np.float64)
        fields[name] = arr.reshape(count, width) if width > 1 else arr
        off += count * width * 4
    return GaussianSet(**fields)


# -- vector quantization --------------------------------------------------------

def kmeans(data: np.ndarray, k: int, iters: int, seed: int,
           chunk: int = 65536) -> tuple[np.ndarray, np.ndarray, list[float]]:
    """Lloyd's k-means with k-means++ seeding.

    Returns (centroids, assignment, per-iteration objective); the objective
    is the mean squared distance to the assigned centroid and is
    non-increasing across iterations.
    """
    n, d = data.shape
    if not (1 <= k <= n):
        raise ValueError(f"need 1 <= k <= {n}, got {k}")
    rng = np.random.default_rng(seed)

    # k-means++ seeding
    centroids = np.empty((k, d))
    centroids[0] = data[rng.integers(n)]
    best_d2 = ((data - centroids[0]) ** 2).sum(axis=1)
    for j in range(1, k):
        total = best_d2.sum()
        if total <= 0:
            centroids[j:] = data[rng.integers(n, size=k - j)]
            break
        probs = best_d2 / total
        centroids[j] = data[rng.choice(n, p=probs)]
        d2 = ((data - centroids[j]) ** 2).sum(axis=1)
        np.minimum(best_d2, d2, out=best_d2)

    assign = np.zeros(n, dtype=np.int64)
    objective: list[float] = []
    for _ in range(max(1, iters)):
        sq_c = (centroids ** 2).sum(axis=1)
        total_d2 = 0.0
        for start in range(0, n, chunk):
            block = data[start:start + chunk]
            d2 = sq_c[None, :] - 2.0 * (block @ centroids.T)
            idx = np.argmin(d2, axis=1)
            assign[start:start + chunk] = idx
            total_d2 += (d2[np.arange(len(block)), idx] + (block ** 2).sum(axis=1)).sum()
        objective.append(float(total_d2 / n))

        sums = np.zeros((k, d))
        counts = np.zeros(k)
        np.add.at(sums, assign, data)
        np.add.at(counts, assign, 1.0)
        occupied = counts > 0
        new_centroids = centroids.copy()
        new_centroids[occupied] = sums[occupied] / counts[occupied, None]
        centroids = new_centroids
    return centroids, assign, objective


def vq_compress(gs: GaussianSet, k: int = 4096, iters: int = 10, seed: int = 0) -> VqModel:
    """Cluster the 16-d attribute vectors into a codebook; positions stay exact."""
    if k > len(gs):
        raise ValueError(f"codebook size {k} exceeds Gaussian count {len(gs)}")
    attrs = gs.attribute_matrix()
    centroids, assign, _ = kmeans(attrs, k, iters, seed)
    return VqModel(position=gs.position.copy(), codebook=centroids, indices=assign.astype(np.uint32))


def vq_decompress(vq: VqModel) -> GaussianSet:
    attrs = vq.codebook[vq.indices.astype(np.int64)]
    return GaussianSet.from_attribute_matrix(vq.position, attrs)


def save_viewer_manifest(path, gs: GaussianSet, raw_range, colormap_names_list,
                         default_colormap="viridis", extra: dict | None = None) -> None:
    import json

    lo, hi = gs.bbox()
    manifest = {
        "model": "model.vegs",
        "count": len(gs),
        "raw_range": [float(raw_range[0]), float(raw_range[1])],
        "bbox": {"min": [float(x) for x in lo], "max": [float(x) for x in hi]},
        "colormaps": colormap_names_list,
        "default_colormap": default_colormap,
    }
    if extra:
        manifest.update(extra)
    with open(path, "w") as f:
        json.dump(manifest, f, indent=1, sort_keys=True)
