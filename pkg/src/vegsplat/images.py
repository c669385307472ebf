"""Float framebuffers plus lossless 8-bit PNG and float PFM round-tripping."""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np
from PIL import Image


@dataclass
class ImageBuffer:
    """RGB(A) framebuffer with optional auxiliary planes.

    rgb is (H, W, 3), alpha (H, W); aux planes share the spatial shape:
    depth (H, W), normal (H, W, 3), attrs (H, W, k) for blended lighting
    attributes, transmittance = 1 - alpha.
    """

    rgb: np.ndarray
    alpha: np.ndarray = None
    depth: np.ndarray | None = None
    normal: np.ndarray | None = None
    attrs: np.ndarray | None = None

    def __post_init__(self):
        if self.rgb.ndim != 3 or self.rgb.shape[2] != 3:
            raise ValueError("rgb plane must have shape (H, W, 3)")
        if self.alpha is None:
            self.alpha = np.zeros(self.rgb.shape[:2], dtype=self.rgb.dtype)
        for name in ("alpha", "depth", "normal", "attrs"):
            plane = getattr(self, name)
            if plane is not None and plane.shape[:2] != self.rgb.shape[:2]:
                raise ValueError(f"{name} plane shape {plane.shape} mismatches rgb {self.rgb.shape}")

    @property
    def width(self) -> int:
        return self.rgb.shape[1]

    @property
    def height(self) -> int:
        return self.rgb.shape[0]

    @property
    def transmittance(self) -> np.ndarray:
        return 1.0 - self.alpha


def to_uint8(rgb: np.ndarray) -> np.ndarray:
    return np.clip(np.round(np.asarray(rgb) * 255.0), 0, 255).astype(np.uint8)


def write_png(path, rgb: np.ndarray) -> None:
    Image.fromarray(to_uint8(rgb), mode="RGB").save(str(path), format="PNG")


def read_png(path) -> np.ndarray:
    with Image.open(str(path)) as im:
        arr = np.asarray(im.convert("RGB"), dtype=np.float64)
    return arr / 255.0


def write_pfm(path, data: np.ndarray) -> None:
    """Portable float map, color (H, W, 3) or grayscale (H, W), little-endian."""
    data = np.asarray(data, dtype="<f4")
    color = data.ndim == 3
    with open(path, "wb") as f:
        f.write(b"PF\n" if color else b"Pf\n")
        f.write(f"{data.shape[1]} {data.shape[0]}\n".encode())
        f.write(b"-1.0\n")  # negative scale marks little-endian
        f.write(data[::-1].tobytes())  # bottom-up row order


def read_pfm(path) -> np.ndarray:
    with open(path, "rb") as f:
        header = f.readline().strip()
        if header not in (b"PF", b"Pf"):
            raise ValueError(f"{path}: not a PFM file")
        width, height = (int(x) for x in f.readline().split())
        scale = float(f.readline())
        count = width * height * (3 if header == b"PF" else 1)
        data = np.frombuffer(f.read(count * 4), dtype="<f4" if scale < 0 else ">f4")
    shape = (height, width, 3) if header == b"PF" else (height, width)
    return data.reshape(shape)[::-1].astype(np.float64)
