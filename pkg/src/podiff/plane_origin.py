"""Transforms between depth maps and plane-origin distance maps.

For a pixel with depth ``D``, unit normal ``N`` and viewing ray ``r`` the
plane-origin distance is ``P = D * (N . r)``: the distance from the camera
centre to the tangent plane through the observed point. It is constant over
a planar surface, which is what makes it a good space to diffuse in.

Zero marks an invalid pixel in both depth and plane-origin maps.
"""

from __future__ import annotations

import numpy as np

from .camera import Intrinsics, check_grid, ray_grid

EPS_RAY = 1e-3


def normal_dot_ray(N: np.ndarray, K: Intrinsics) -> np.ndarray:
    check_grid(N, K, "normals")
    return np.einsum("hwc,hwc->hw", N, ray_grid(K))


def depth_to_plane_origin(
    D: np.ndarray, N: np.ndarray, K: Intrinsics, eps_ray: float = EPS_RAY
) -> np.ndarray:
    check_grid(D, K, "depth")
    ndr = normal_dot_ray(N, K)
    # N . r > 0 by convention; a wrong-signed normal would yield P < 0, so treat as invalid
    valid = (D > 0) & np.isfinite(D) & (ndr >= eps_ray)
    return np.where(valid, D * ndr, 0.0)


def plane_origin_to_depth(
    P: np.ndarray, N: np.ndarray, K: Intrinsics, eps_ray: float = EPS_RAY
) -> np.ndarray:
    check_grid(P, K, "plane-origin map")
    ndr = normal_dot_ray(N, K)
    # grazing rays become invalid pixels rather than blowing up
    valid = (P > 0) & np.isfinite(P) & (ndr >= eps_ray)
    safe = np.where(valid, ndr, 1.0)
    return np.where(valid, P / safe, 0.0)
