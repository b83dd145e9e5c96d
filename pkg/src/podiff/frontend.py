"""Deterministic stand-ins for the learned prediction stage.

Everything the refinement needs besides the sparse seeds comes from here:
a coarse dense depth, per-pixel normals, seed confidences and the guidance
features the conductance is computed from.
"""

from __future__ import annotations

import numpy as np
from scipy import ndimage
from scipy.spatial import cKDTree

from .camera import Intrinsics, backproject_map, check_grid, ray_grid
from .errors import InvalidInputError

GUIDANCE_CHANNELS = ("u", "v", "depth", "nx", "ny", "nz")


def coarse_from_sparse(sparse: np.ndarray, k: int = 8, p: float = 2.0) -> np.ndarray:
    """Densify sparse depth by inverse-distance weighting of the ``k`` nearest seeds.

    Weights are ``(1 / dist) ** p`` in pixel units. Seed pixels keep their
    value exactly.
    """
    if k < 1:
        raise InvalidInputError(f"k must be >= 1, got {k}")
    seed_mask = sparse > 0
    n_seeds = int(seed_mask.sum())
    if n_seeds == 0:
        raise InvalidInputError("sparse depth has no valid seeds")

    seed_rc = np.argwhere(seed_mask)
    seed_val = sparse[seed_mask]
    k = min(k, n_seeds)

    H, W = sparse.shape
    rr, cc = np.mgrid[0:H, 0:W]
    query = np.column_stack([rr.ravel(), cc.ravel()]).astype(np.float64)
    dist, idx = cKDTree(seed_rc).query(query, k=k)
    if k == 1:
        dist, idx = dist[:, None], idx[:, None]

    vals = seed_val[idx]
    hit = dist[:, 0] == 0.0
    with np.errstate(divide="ignore"):
        w = np.where(dist > 0, 1.0 / dist, 0.0) ** p
    wsum = w.sum(axis=1)
    out = np.empty(H * W)
    out[~hit] = (w[~hit] * vals[~hit]).sum(axis=1) / wsum[~hit]
    # distance-0 seed dominates
    out[hit] = vals[hit, 0]
    return out.reshape(H, W)


def _window_sum(a: np.ndarray, w: int) -> np.ndarray:
    """Sum over a (2w+1)^2 window with zero padding outside the grid."""
    size = 2 * w + 1
    kernel = np.ones((size, size) + (1,) * (a.ndim - 2))
    return ndimage.correlate(a, kernel, mode="constant", cval=0.0)


def estimate_normals(D: np.ndarray, K: Intrinsics, w: int = 2) -> np.ndarray:
    """Per-pixel normals from a least-squares plane fit over a (2w+1)^2 window.

    The normal is the eigenvector of the smallest eigenvalue of the covariance
    of the back-projected valid points in the window, oriented so that
    ``N . r > 0``. Pixels with fewer than 3 valid window points (or with an
    invalid depth) take the normal of the nearest pixel that has one.
    """
    if w < 1:
        raise InvalidInputError(f"window radius must be >= 1, got {w}")
    check_grid(D, K, "depth")
    valid = (D > 0) & np.isfinite(D)
    pts = np.where(valid[..., None], backproject_map(np.where(valid, D, 0.0), K), 0.0)

    n = _window_sum(valid.astype(np.float64), w)
    s1 = _window_sum(pts, w)
    s2 = _window_sum(pts[..., :, None] * pts[..., None, :], w)

    ok = valid & (n >= 3)
    if not ok.any():
        raise InvalidInputError("no pixel has enough valid neighbours to fit a plane")
    nn = np.where(ok, n, 1.0)[..., None]
    mean = s1 / nn
    cov = s2 / nn[..., None] - mean[..., :, None] * mean[..., None, :]

    normals = np.zeros(D.shape + (3,))
    _, vecs = np.linalg.eigh(cov[ok])
    normals[ok] = vecs[:, :, 0]

    if not ok.all():
        _, (ri, ci) = ndimage.distance_transform_edt(~ok, return_indices=True)
        normals = normals[ri, ci]

    normals /= np.linalg.norm(normals, axis=-1, keepdims=True)
    flip = np.einsum("hwc,hwc->hw", normals, ray_grid(K)) < 0
    normals[flip] *= -1.0
    return normals


def confidence_from_residual(sparse: np.ndarray, coarse: np.ndarray, b: float) -> np.ndarray:
    """Gaussian seed confidence ``exp(-(seed - coarse)^2 / (2 b^2))``; 0 off-seed."""
    if not b > 0:
        raise InvalidInputError(f"confidence tolerance b must be positive, got {b}")
    seeds = sparse > 0
    resid = np.where(seeds, sparse - coarse, 0.0)
    return np.where(seeds, np.exp(-(resid**2) / (2.0 * b * b)), 0.0)


def build_guidance(
    D: np.ndarray,
    N: np.ndarray,
    depth_max: float,
    channels=GUIDANCE_CHANNELS,
) -> np.ndarray:
    """Stack hand-crafted guidance features into an (H, W, F) array.

    Channels are chosen by name from ``u``, ``v`` (pixel coordinates over the
    grid size), ``depth`` (over ``depth_max``) and ``nx``, ``ny``, ``nz``.
    Every channel is clamped to [-1, 1].
    """
    if not depth_max > 0:
        raise InvalidInputError(f"depth_max must be positive, got {depth_max}")
    if D.shape != N.shape[:2]:
        raise InvalidInputError(f"depth {D.shape} and normals {N.shape[:2]} differ in size")
    H, W = D.shape
    available = {
        "u": lambda: np.broadcast_to(np.arange(W) / W, (H, W)),
        "v": lambda: np.broadcast_to((np.arange(H) / H)[:, None], (H, W)),
        "depth": lambda: D / depth_max,
        "nx": lambda: N[..., 0],
        "ny": lambda: N[..., 1],
        "nz": lambda: N[..., 2],
    }
    unknown = [c for c in channels if c not in available]
    if unknown or not channels:
        raise InvalidInputError(f"unknown guidance channels {unknown}; choose from {GUIDANCE_CHANNELS}")
    G = np.stack([available[c]() for c in channels], axis=-1).astype(np.float64)
    return np.clip(G, -1.0, 1.0)
