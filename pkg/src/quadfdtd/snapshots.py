"""Pressure snapshot files and their rendering to images.

Frame file layout (little-endian)::

    8s   magic  b"QFDTDSNP"
    u32  nx
    u32  ny
    f64  ds (m)
    f64  dt (s)
    u64  step index
    f32  p[nx, ny], row-major (i slowest)
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

MAGIC = b"QFDTDSNP"
_HEADER = struct.Struct("<8sIIddQ")
OBSTACLE_RGB = (16, 24, 96)


@dataclass(frozen=True, eq=False)
class Frame:
    p: np.ndarray
    ds: float
    dt: float
    step: int

    @property
    def time(self) -> float:
        return self.step * self.dt


def write_frame(path, p: np.ndarray, ds: float, dt: float, step: int) -> None:
    nx, ny = p.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, nx, ny, ds, dt, step))
        fh.write(np.ascontiguousarray(p, dtype="<f4").tobytes())


def read_frame(path) -> Frame:
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
        magic, nx, ny, ds, dt, step = _HEADER.unpack(head)
        if magic != MAGIC:
            raise ValueError(f"{path}: not a snapshot frame")
        p = np.frombuffer(fh.read(4 * nx * ny), dtype="<f4").reshape(nx, ny)
    return Frame(p.astype(np.float32), ds, dt, step)


def frame_image_name(step: int, dt: float, ext: str = "png") -> str:
    return f"frame_{step:08d}_t{step * dt:.6f}s.{ext}"


def snapshot_to_image(frame: np.ndarray, mask: np.ndarray | None = None,
                      cmap: str = "inferno") -> np.ndarray:
    """RGB uint8 image (ny, nx, 3) of |p| normalised to the frame maximum.

    Image row 0 is the top of the domain (largest y).  Obstacle cells are
    painted ``OBSTACLE_RGB`` whatever their pressure.
    """
    from matplotlib import colormaps

    if mask is not None and mask.shape != frame.shape:
        raise ValueError(f"frame shape {frame.shape} does not match mask {mask.shape}")
    a = np.abs(np.asarray(frame, dtype=np.float64))
    top = a.max()
    norm = a / top if top > 0 else np.zeros_like(a)
    rgb = (colormaps[cmap](norm)[..., :3] * 255).round().astype(np.uint8)
    if mask is not None:
        rgb[mask == 0] = OBSTACLE_RGB
    return np.ascontiguousarray(rgb.transpose(1, 0, 2)[::-1])


def save_image(rgb: np.ndarray, path) -> None:
    from PIL import Image

    Image.fromarray(rgb).save(path)
