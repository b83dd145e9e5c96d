"""Piecewise-planar ground-truth scenes, sparse sampling and seed corruption."""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from typing import NamedTuple

import numpy as np
from scipy import ndimage

from .camera import Intrinsics, ray_grid
from .errors import InvalidInputError, SceneSpecError

PRESET_NAMES = ("single-plane", "wedge", "staircase", "box-on-ground")

DEFAULT_CAMERA = Intrinsics(fx=100.0, fy=100.0, cx=64.0, cy=48.0, width=128, height=96)


@dataclass(frozen=True)
class Plane:
    """Plane ``n . X = offset`` with unit normal ``n``.

    ``region`` optionally restricts the plane to the half-open pixel box
    ``[u0, u1) x [v0, v1)``, given as ``(u0, v0, u1, v1)``. ``bounds``
    optionally restricts the 3D hit point to an axis-aligned box
    ``((xmin, xmax), (ymin, ymax), (zmin, zmax))``; use ``None`` for an
    unbounded axis.
    """

    normal: tuple[float, float, float]
    offset: float
    region: tuple[int, int, int, int] | None = None
    bounds: tuple | None = None

    def __post_init__(self):
        n = np.asarray(self.normal, dtype=np.float64)
        norm = np.linalg.norm(n)
        if n.shape != (3,) or not norm > 0:
            raise SceneSpecError(f"plane normal must be a nonzero 3-vector, got {self.normal}")
        if not self.offset > 0:
            raise SceneSpecError(f"plane offset must be positive, got {self.offset}")
        object.__setattr__(self, "normal", tuple(float(x) for x in n / norm))
        if self.bounds is not None:
            if len(self.bounds) != 3:
                raise SceneSpecError(f"bounds need one (min, max) pair per axis, got {self.bounds}")
            b = tuple(None if ax is None else (float(ax[0]), float(ax[1])) for ax in self.bounds)
            object.__setattr__(self, "bounds", b)

    def covers(self, rays: np.ndarray, z: np.ndarray, cam_from_world: np.ndarray) -> np.ndarray:
        H, W = z.shape
        cover = np.ones((H, W), dtype=bool)
        if self.region is not None:
            u0, v0, u1, v1 = self.region
            cover[:] = False
            cover[max(v0, 0):max(v1, 0), max(u0, 0):max(u1, 0)] = True
        if self.bounds is not None:
            with np.errstate(invalid="ignore"):
                pts = (z[..., None] * rays) @ cam_from_world
            for axis, lim in enumerate(self.bounds):
                if lim is not None:
                    # tolerance keeps hits exactly on a shared edge from slipping through both faces
                    cover &= (pts[..., axis] >= lim[0] - 1e-9) & (pts[..., axis] <= lim[1] + 1e-9)
        return cover


@dataclass(frozen=True)
class SceneSpec:
    name: str
    camera: Intrinsics
    planes: tuple[Plane, ...]
    depth_range: tuple[float, float] = (0.1, 100.0)
    # camera tilted down by this angle; planes and bounds are given in the level frame
    pitch_deg: float = 0.0

    @property
    def cam_from_world(self) -> np.ndarray:
        t = np.deg2rad(self.pitch_deg)
        c, s = np.cos(t), np.sin(t)
        return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])

    @classmethod
    def from_dict(cls, d: dict) -> "SceneSpec":
        try:
            planes = tuple(
                Plane(
                    tuple(p["normal"]),
                    float(p["offset"]),
                    tuple(p["region"]) if p.get("region") else None,
                    tuple(p["bounds"]) if p.get("bounds") else None,
                )
                for p in d["planes"]
            )
            camera = Intrinsics.from_dict(d["camera"]) if "camera" in d else DEFAULT_CAMERA
            zr = tuple(float(z) for z in d.get("depth_range", (0.1, 100.0)))
        except (KeyError, TypeError) as exc:
            raise SceneSpecError(f"malformed scene spec: {exc!r}") from exc
        if not planes:
            raise SceneSpecError("scene has no planes")
        return cls(
            name=d.get("name", "custom"),
            camera=camera,
            planes=planes,
            depth_range=zr,
            pitch_deg=float(d.get("pitch_deg", 0.0)),
        )

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "camera": self.camera.to_dict(),
            "depth_range": list(self.depth_range),
            "pitch_deg": self.pitch_deg,
            "planes": [
                {
                    "normal": list(p.normal),
                    "offset": p.offset,
                    "region": list(p.region) if p.region else None,
                    "bounds": [list(ax) if ax else None for ax in p.bounds] if p.bounds else None,
                }
                for p in self.planes
            ],
        }


def load_preset(name: str) -> SceneSpec:
    if name not in PRESET_NAMES:
        raise SceneSpecError(f"unknown preset scene {name!r}; choose from {PRESET_NAMES}")
    text = resources.files("podiff").joinpath("presets").joinpath(f"{name}.json").read_text()
    return SceneSpec.from_dict(json.loads(text))


class RenderedScene(NamedTuple):
    depth: np.ndarray
    normals: np.ndarray
    labels: np.ndarray


def render_scene(spec: SceneSpec) -> RenderedScene:
    """Ray-cast the scene: each pixel sees the nearest plane covering it.

    Returns ground-truth depth, normals oriented so ``N . r > 0``, and the
    index of the owning plane per pixel.
    """
    K = spec.camera
    rays = ray_grid(K)
    H, W = K.shape
    best = np.full((H, W), np.inf)
    labels = np.full((H, W), -1, dtype=np.int64)
    ndr_owner = np.zeros((H, W))
    R = spec.cam_from_world
    cam_normals = np.asarray([R @ np.asarray(p.normal) for p in spec.planes])

    for idx, plane in enumerate(spec.planes):
        ndr = rays @ cam_normals[idx]
        # rays parallel to the plane never hit it
        hit = np.abs(ndr) > 0
        with np.errstate(divide="ignore", invalid="ignore"):
            z = np.where(hit, plane.offset / np.where(hit, ndr, 1.0), np.inf)
        hit &= z > 0
        hit &= plane.covers(rays, np.where(hit, z, 0.0), R)
        take = hit & (z < best)
        best[take] = z[take]
        labels[take] = idx
        ndr_owner[take] = ndr[take]

    if (labels < 0).any():
        v, u = np.argwhere(labels < 0)[0]
        raise SceneSpecError(f"scene {spec.name!r}: pixel ({u}, {v}) is not covered by any plane")
    if (np.abs(ndr_owner) < 1e-9).any():
        raise SceneSpecError(f"scene {spec.name!r}: a plane is parallel to a ray it owns")
    zmin, zmax = spec.depth_range
    if best.min() < zmin or best.max() > zmax:
        raise SceneSpecError(
            f"scene {spec.name!r}: depth spans [{best.min():.3f}, {best.max():.3f}] m, "
            f"outside the declared range [{zmin}, {zmax}]"
        )

    normals = cam_normals[labels]
    # n . r > 0 follows from positive offset and positive depth; kept explicit
    normals[ndr_owner < 0] *= -1.0
    return RenderedScene(best, normals, labels)


@dataclass(frozen=True)
class SamplePattern:
    """Seed selection. ``uniform-random`` uses ``count`` if set, else ``ratio``;
    ``scanline`` keeps every ``row_step``-th row."""

    mode: str = "uniform-random"
    ratio: float = 0.05
    count: int | None = None
    row_step: int = 4
    seed: int = 0

    def __post_init__(self):
        if self.mode not in ("uniform-random", "scanline"):
            raise InvalidInputError(f"unknown sampling mode {self.mode!r}")
        if not 0 < self.ratio <= 1:
            raise InvalidInputError(f"sampling ratio must be in (0, 1], got {self.ratio}")
        if self.count is not None and self.count < 0:
            raise InvalidInputError(f"sample count must be >= 0, got {self.count}")
        if self.row_step < 1:
            raise InvalidInputError(f"row_step must be >= 1, got {self.row_step}")


def sample_sparse(depth: np.ndarray, pattern: SamplePattern) -> np.ndarray:
    """Keep a subset of valid pixels of ``depth``, zeroing the rest.

    Uniform sampling draws a seeded permutation of the valid pixels and keeps
    its prefix, so smaller ratios with the same seed select nested subsets.
    """
    valid = depth > 0
    out = np.zeros_like(depth)
    if pattern.mode == "scanline":
        rows = np.zeros(depth.shape[0], dtype=bool)
        rows[:: pattern.row_step] = True
        keep = valid & rows[:, None]
        out[keep] = depth[keep]
        return out

    flat = np.flatnonzero(valid)
    count = pattern.count if pattern.count is not None else int(round(pattern.ratio * flat.size))
    if count > flat.size:
        raise InvalidInputError(f"requested {count} samples but only {flat.size} valid pixels")
    order = np.random.default_rng(pattern.seed).permutation(flat.size)
    pick = flat[order[:count]]
    out.flat[pick] = depth.flat[pick]
    return out


def boundary_mask(labels: np.ndarray, radius: int = 2) -> np.ndarray:
    """Pixels within ``radius`` px (chessboard) of a change in plane ownership."""
    edge = np.zeros(labels.shape, dtype=bool)
    dv = labels[1:, :] != labels[:-1, :]
    du = labels[:, 1:] != labels[:, :-1]
    edge[1:, :] |= dv
    edge[:-1, :] |= dv
    edge[:, 1:] |= du
    edge[:, :-1] |= du
    if radius > 1:
        edge = ndimage.binary_dilation(edge, iterations=radius - 1, structure=np.ones((3, 3)))
    return edge


def inject_noise(
    sparse: np.ndarray,
    outlier_frac: float,
    magnitude: float,
    seed: int = 0,
    boundary: np.ndarray | None = None,
    boundary_bias: float = 4.0,
) -> np.ndarray:
    """Corrupt ``round(outlier_frac * n_seeds)`` seeds to ``d * (1 +- magnitude)``.

    Seeds inside ``boundary`` are ``boundary_bias`` times more likely to be
    picked. The sign of each corruption is random.
    """
    if not 0 <= outlier_frac <= 1:
        raise InvalidInputError(f"outlier fraction must be in [0, 1], got {outlier_frac}")
    if not 0 <= magnitude < 1:
        raise InvalidInputError(f"relative magnitude must be in [0, 1), got {magnitude}")
    out = sparse.copy()
    seeds = np.flatnonzero(sparse > 0)
    n_bad = int(round(outlier_frac * seeds.size))
    if n_bad == 0 or magnitude == 0:
        return out
    weights = np.ones(seeds.size)
    if boundary is not None:
        weights[boundary.flat[seeds]] = boundary_bias
    rng = np.random.default_rng(seed)
    bad = rng.choice(seeds, size=n_bad, replace=False, p=weights / weights.sum())
    sign = rng.choice([-1.0, 1.0], size=n_bad)
    out.flat[bad] = sparse.flat[bad] * (1.0 + sign * magnitude)
    return out
