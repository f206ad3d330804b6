"""Gramian angular difference field encoding of sTEC-rate windows.

A window is min-max rescaled into [-1, 1], mapped to polar angles
phi = arccos(x), and expanded into the antisymmetric matrix
M[i, j] = sin(phi_i - phi_j), evaluated in closed form as

    M[i, j] = sqrt(1 - x_i^2) * x_j - x_i * sqrt(1 - x_j^2)

The classifier consumes the real-valued matrix (optionally resized);
8-bit quantization exists only for inspection fixtures and must not
enter the training path.
"""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import ChecksumError, DataFormatError, VersionError

GADF_MAGIC = b"GADF"
GADF_VERSION = 1


def rescale_unit(values: np.ndarray, bounds: tuple[float, float] | None = None) -> np.ndarray:
    """Min-max rescale a window into [-1, 1].

    A constant window maps to all zeros. `bounds` substitutes explicit
    (low, high) normalization limits for the window's own min/max, which
    lets callers experiment with wider-scope normalization.
    """
    values = np.asarray(values, dtype=np.float64)
    if not np.all(np.isfinite(values)):
        raise ValueError("window values must be finite")
    lo, hi = bounds if bounds is not None else (values.min(), values.max())
    if hi <= lo:
        return np.zeros_like(values)
    scaled = 2.0 * (values - lo) / (hi - lo) - 1.0
    return np.clip(scaled, -1.0, 1.0)


def gadf_matrix(scaled: np.ndarray) -> np.ndarray:
    """Difference-field matrix of a unit-rescaled window.

    Output is antisymmetric with a zero diagonal and entries in [-1, 1].
    """
    x = np.asarray(scaled, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError("expected a 1-d window")
    if np.max(np.abs(x), initial=0.0) > 1.0 + 1e-12:
        raise ValueError("rescaled values must lie in [-1, 1] (tolerance 1e-12)")
    x = np.clip(x, -1.0, 1.0)
    s = np.sqrt(1.0 - x * x)
    return np.outer(s, x) - np.outer(x, s)


def resize_bilinear(matrix: np.ndarray, target: tuple[int, int]) -> np.ndarray:
    """Corner-aligned bilinear resize of a 2-d field."""
    m = np.asarray(matrix, dtype=np.float64)
    if m.ndim != 2:
        raise ValueError("expected a 2-d matrix")
    out_h, out_w = target
    if out_h < 1 or out_w < 1:
        raise ValueError("target dimensions must be >= 1")

    def axis_coords(src: int, dst: int) -> np.ndarray:
        if dst == 1 or src == 1:
            return np.zeros(dst)
        return np.arange(dst) * ((src - 1) / (dst - 1))

    ys = axis_coords(m.shape[0], out_h)
    xs = axis_coords(m.shape[1], out_w)
    y0 = np.floor(ys).astype(np.intp)
    x0 = np.floor(xs).astype(np.intp)
    y1 = np.minimum(y0 + 1, m.shape[0] - 1)
    x1 = np.minimum(x0 + 1, m.shape[1] - 1)
    wy = (ys - y0)[:, None]
    wx = (xs - x0)[None, :]

    top = (1.0 - wx) * m[np.ix_(y0, x0)] + wx * m[np.ix_(y0, x1)]
    bottom = (1.0 - wx) * m[np.ix_(y1, x0)] + wx * m[np.ix_(y1, x1)]
    return (1.0 - wy) * top + wy * bottom


def quantize_to_image(matrix: np.ndarray) -> np.ndarray:
    """Map [-1, 1] entries to 8-bit intensities: round((v + 1) / 2 * 255)."""
    m = np.clip(np.asarray(matrix, dtype=np.float64), -1.0, 1.0)
    return np.rint((m + 1.0) / 2.0 * 255.0).astype(np.uint8)


def encode_window(
    values: np.ndarray, size: int, bounds: tuple[float, float] | None = None
) -> np.ndarray:
    """Full window encoder used by the classifier: rescale -> GADF -> resize."""
    matrix = gadf_matrix(rescale_unit(values, bounds))
    if matrix.shape == (size, size):
        return matrix
    return resize_bilinear(matrix, (size, size))


def write_png(image: np.ndarray, path: str | Path) -> None:
    image = np.asarray(image)
    if image.dtype != np.uint8 or image.ndim != 2:
        raise ValueError("expected a 2-d uint8 image")
    Image.fromarray(image, mode="L").save(Path(path), format="PNG")


def write_gadf_binary(matrix: np.ndarray, path: str | Path) -> None:
    """Serialize a field matrix: magic `GADF`, version, u32 rows/cols, f32 data."""
    m = np.asarray(matrix, dtype=np.float32)
    if m.ndim != 2:
        raise ValueError("expected a 2-d matrix")
    with open(path, "wb") as handle:
        handle.write(GADF_MAGIC)
        handle.write(struct.pack("<B", GADF_VERSION))
        handle.write(struct.pack("<II", m.shape[0], m.shape[1]))
        handle.write(m.astype("<f4").tobytes(order="C"))


def read_gadf_binary(path: str | Path) -> np.ndarray:
    path = Path(path)
    blob = path.read_bytes()
    if len(blob) < 13 or blob[:4] != GADF_MAGIC:
        raise DataFormatError(f"{path}: not a GADF binary")
    version = blob[4]
    if version != GADF_VERSION:
        raise VersionError(f"{path}: unsupported GADF version {version}")
    rows, cols = struct.unpack("<II", blob[5:13])
    expected = 13 + 4 * rows * cols
    if len(blob) != expected:
        raise ChecksumError(f"{path}: expected {expected} bytes, found {len(blob)}")
    data = np.frombuffer(blob, dtype="<f4", offset=13, count=rows * cols)
    return data.reshape(rows, cols).astype(np.float64)
