"""Depth map files.

Two formats:

* 16-bit single-channel PNG, KITTI devkit convention: metres = raw / 256,
  raw 0 = invalid. Quantised to 1/256 m.
* ``.f32`` lossless maps: 4-byte magic ``PDM1``, little-endian uint32 height
  and width, then height*width little-endian float32 values, row-major.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import DepthFormatError

MAGIC = b"PDM1"
_HEADER = struct.Struct("<4sII")
PNG_SCALE = 256.0
_PNG_MAX = 65535


def write_depth_png(path, depth: np.ndarray) -> None:
    raw = np.where(depth > 0, np.rint(depth * PNG_SCALE), 0)
    raw = np.clip(raw, 0, _PNG_MAX).astype(np.uint16)
    Image.fromarray(raw).save(path, format="PNG")


def read_depth_png(path) -> np.ndarray:
    with Image.open(path) as img:
        if img.mode not in ("I;16", "I;16B", "I;16L", "I"):
            raise DepthFormatError(f"{path}: expected a 16-bit single-channel PNG, got mode {img.mode}", 0)
        raw = np.asarray(img).astype(np.int64)
    if raw.ndim != 2 or raw.min() < 0 or raw.max() > _PNG_MAX:
        raise DepthFormatError(f"{path}: values outside the 16-bit range", 0)
    return raw.astype(np.float64) / PNG_SCALE


def write_depth_raw(path, depth: np.ndarray) -> None:
    if depth.ndim != 2:
        raise ValueError(f"depth map must be 2D, got shape {depth.shape}")
    h, w = depth.shape
    data = np.ascontiguousarray(depth, dtype="<f4").tobytes()
    Path(path).write_bytes(_HEADER.pack(MAGIC, h, w) + data)


def read_depth_raw(path) -> np.ndarray:
    """Read a ``.f32`` map as float32 (bit-identical to what was written)."""
    blob = Path(path).read_bytes()
    if len(blob) < _HEADER.size:
        raise DepthFormatError(f"{path}: truncated header ({len(blob)} bytes)", len(blob))
    magic, h, w = _HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise DepthFormatError(f"{path}: bad magic {magic!r}", 0)
    expected = _HEADER.size + 4 * h * w
    if len(blob) != expected:
        raise DepthFormatError(
            f"{path}: {h}x{w} map needs {expected} bytes, file has {len(blob)}", min(len(blob), expected)
        )
    return np.frombuffer(blob, dtype="<f4", offset=_HEADER.size).reshape(h, w).astype(np.float32)


def write_confidence_png(path, conf: np.ndarray) -> None:
    Image.fromarray(np.rint(np.clip(conf, 0.0, 1.0) * 255).astype(np.uint8)).save(path, format="PNG")
