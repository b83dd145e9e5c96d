"""Pinhole camera model: intrinsics, per-pixel viewing rays and back-projection.

Pixel centres sit at integer coordinates, ``u`` indexes columns and ``v``
indexes rows. Skew and lens distortion are not modelled.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError


@dataclass(frozen=True)
class Intrinsics:
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise InvalidInputError(f"focal lengths must be positive, got fx={self.fx}, fy={self.fy}")
        if self.width < 1 or self.height < 1:
            raise InvalidInputError(f"grid must be non-empty, got {self.width}x{self.height}")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise InvalidInputError(
                f"principal point ({self.cx}, {self.cy}) outside {self.width}x{self.height} grid"
            )

    @property
    def shape(self) -> tuple[int, int]:
        return (self.height, self.width)

    @property
    def matrix(self) -> np.ndarray:
        return np.array(
            [[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]]
        )

    @classmethod
    def from_dict(cls, d: dict) -> "Intrinsics":
        return cls(
            fx=float(d["fx"]),
            fy=float(d["fy"]),
            cx=float(d["cx"]),
            cy=float(d["cy"]),
            width=int(d["width"]),
            height=int(d["height"]),
        )

    def to_dict(self) -> dict:
        return {
            "fx": self.fx,
            "fy": self.fy,
            "cx": self.cx,
            "cy": self.cy,
            "width": self.width,
            "height": self.height,
        }


def ray_grid(K: Intrinsics) -> np.ndarray:
    """Return the (H, W, 3) grid of viewing rays ``C^-1 [u, v, 1]``.

    The z component is exactly 1 at every pixel.
    """
    u = (np.arange(K.width, dtype=np.float64) - K.cx) / K.fx
    v = (np.arange(K.height, dtype=np.float64) - K.cy) / K.fy
    rays = np.empty((K.height, K.width, 3), dtype=np.float64)
    rays[..., 0] = u[None, :]
    rays[..., 1] = v[:, None]
    rays[..., 2] = 1.0
    return rays


def pixel_ray(K: Intrinsics, pixel) -> np.ndarray:
    u, v = pixel
    return np.array([(u - K.cx) / K.fx, (v - K.cy) / K.fy, 1.0])


def backproject(K: Intrinsics, pixel, d: float) -> np.ndarray:
    """Lift pixel ``(u, v)`` at depth ``d`` metres to a camera-frame 3D point."""
    if not (np.isfinite(d) and d > 0):
        raise InvalidInputError(f"depth must be positive and finite, got {d}")
    point = d * pixel_ray(K, pixel)
    point[2] = d
    return point


def project(K: Intrinsics, point) -> np.ndarray:
    """Project a camera-frame point to continuous pixel coordinates ``(u, v)``."""
    x, y, z = point
    if z <= 0:
        raise InvalidInputError(f"point behind camera (z={z})")
    return np.array([K.fx * x / z + K.cx, K.fy * y / z + K.cy])


def backproject_map(depth: np.ndarray, K: Intrinsics) -> np.ndarray:
    """Back-project a whole depth map to an (H, W, 3) point grid; invalid pixels map to 0."""
    check_grid(depth, K, "depth")
    return depth[..., None] * ray_grid(K)


def check_grid(arr: np.ndarray, K: Intrinsics, name: str) -> None:
    if arr.shape[:2] != K.shape:
        raise InvalidInputError(f"{name} has shape {arr.shape[:2]}, intrinsics expect {K.shape}")
