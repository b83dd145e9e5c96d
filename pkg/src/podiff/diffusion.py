"""Confidence-gated anisotropic diffusion in plane-origin distance space.

One refinement run converts the coarse depth and the sparse seeds to
plane-origin maps, then alternates two steps for a fixed number of
iterations: blend the seeds into the current estimate according to their
confidence, and replace every pixel by a softmax-weighted average of its
``kernel x kernel`` neighbourhood. The result is converted back to depth.

Conductance between a centre pixel ``i`` and a neighbour ``j`` comes from
guidance features embedded by two linear maps ``f`` (centre side) and ``g``
(neighbour side). Four affinity variants are available:

``asymmetric-cosine``  cos(f G_i, g G_j) / temperature
``symmetric-cosine``   same, with ``g`` replaced by ``f``
``euclidean``          -||f G_i - g G_j||^2 / (2 sigma^2)
``dot-product``        (f G_i) . (g G_j)

The weights are the softmax of the affinities over the valid neighbours.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .camera import Intrinsics
from .errors import InvalidInputError
from .plane_origin import EPS_RAY, depth_to_plane_origin, plane_origin_to_depth

VARIANTS = ("asymmetric-cosine", "symmetric-cosine", "euclidean", "dot-product")
COSINE_VARIANTS = ("asymmetric-cosine", "symmetric-cosine")
ABLATIONS = (
    "full",
    "w/o-refinement",
    "w/o-replacement",
    "w/o-confidence",
    "symmetric-cosine",
    "euclidean",
    "dot-product",
)


@dataclass(frozen=True)
class DiffusionConfig:
    kernel: int = 5
    iterations: int = 8
    variant: str = "asymmetric-cosine"
    sigma: float = 1.0
    temperature: float = 0.1
    use_replacement: bool = True
    use_confidence: bool = True
    eps_ray: float = EPS_RAY

    def __post_init__(self):
        if self.kernel < 3 or self.kernel % 2 == 0:
            raise InvalidInputError(f"kernel must be odd and >= 3, got {self.kernel}")
        if self.iterations < 0:
            raise InvalidInputError(f"iterations must be >= 0, got {self.iterations}")
        if self.variant not in VARIANTS:
            raise InvalidInputError(f"unknown variant {self.variant!r}; choose from {VARIANTS}")
        if not self.sigma > 0:
            raise InvalidInputError(f"sigma must be positive, got {self.sigma}")
        if not self.temperature > 0:
            raise InvalidInputError(f"temperature must be positive, got {self.temperature}")
        if not self.eps_ray > 0:
            raise InvalidInputError(f"eps_ray must be positive, got {self.eps_ray}")


@dataclass(frozen=True)
class AffinityTransforms:
    """Linear embeddings ``f`` (centre side) and ``g`` (neighbour side), each E x F."""

    f: np.ndarray
    g: np.ndarray = field(default=None)

    def __post_init__(self):
        f = np.array(self.f, dtype=np.float64)
        g = f.copy() if self.g is None else np.array(self.g, dtype=np.float64)
        if f.ndim != 2 or g.ndim != 2 or f.shape != g.shape:
            raise InvalidInputError(f"f and g must be matrices of equal shape, got {f.shape} and {g.shape}")
        object.__setattr__(self, "f", f)
        object.__setattr__(self, "g", g)

    @classmethod
    def identity(cls, n_features: int) -> "AffinityTransforms":
        return cls(np.eye(n_features), np.eye(n_features))

    @classmethod
    def from_dict(cls, d: dict) -> "AffinityTransforms":
        return cls(d["f"], d.get("g"))

    def to_dict(self) -> dict:
        return {"f": self.f.tolist(), "g": self.g.tolist()}

    def symmetric(self) -> "AffinityTransforms":
        return AffinityTransforms(self.f, self.f)

    def swapped(self) -> "AffinityTransforms":
        return AffinityTransforms(self.g, self.f)


def _transforms_for(G: np.ndarray, cfg: DiffusionConfig, T: AffinityTransforms | None):
    T = T if T is not None else AffinityTransforms.identity(G.shape[-1])
    if T.f.shape[1] != G.shape[-1]:
        raise InvalidInputError(
            f"affinity transforms expect {T.f.shape[1]} features, guidance has {G.shape[-1]}"
        )
    if cfg.variant == "symmetric-cosine":
        T = T.symmetric()
    return T


def _unit(x: np.ndarray) -> np.ndarray:
    # zero-norm embeddings stay zero so their cosine with anything is 0
    norm = np.linalg.norm(x, axis=-1, keepdims=True)
    return np.where(norm > 0, x / np.where(norm > 0, norm, 1.0), 0.0)


def embed(G: np.ndarray, cfg: DiffusionConfig, T: AffinityTransforms | None = None):
    """Return the centre-side and neighbour-side embeddings of guidance ``G``."""
    T = _transforms_for(G, cfg, T)
    ef = G @ T.f.T
    eg = G @ T.g.T
    if cfg.variant in COSINE_VARIANTS:
        ef, eg = _unit(ef), _unit(eg)
    return ef, eg


def raw_affinity(ef: np.ndarray, eg: np.ndarray, cfg: DiffusionConfig) -> np.ndarray:
    """Affinity between embedded centre ``ef`` and neighbour ``eg`` (broadcasting over leading axes)."""
    if cfg.variant in COSINE_VARIANTS:
        return np.sum(ef * eg, axis=-1) / cfg.temperature
    if cfg.variant == "euclidean":
        return -np.sum((ef - eg) ** 2, axis=-1) / (2.0 * cfg.sigma**2)
    return np.sum(ef * eg, axis=-1)


def conductance_weights(
    G: np.ndarray,
    center,
    neighbors,
    cfg: DiffusionConfig,
    T: AffinityTransforms | None = None,
) -> np.ndarray:
    """Softmax-normalised conductance from ``center`` to each of ``neighbors``.

    Pixels are ``(u, v)`` = (column, row) pairs.
    """
    if len(neighbors) == 0:
        raise InvalidInputError("neighbourhood is empty")
    H, W = G.shape[:2]
    for u, v in [center, *neighbors]:
        if not (0 <= u < W and 0 <= v < H):
            raise InvalidInputError(f"pixel ({u}, {v}) outside {W}x{H} grid")
    ef, eg = embed(G, cfg, T)
    cu, cv = center
    nb = np.asarray(neighbors, dtype=int)
    a = raw_affinity(ef[cv, cu], eg[nb[:, 1], nb[:, 0]], cfg)
    e = np.exp(a - a.max())
    return e / e.sum()


def _offsets(kernel: int):
    r = kernel // 2
    return [(dy, dx) for dy in range(-r, r + 1) for dx in range(-r, r + 1)]


def diffuse_step(
    P: np.ndarray,
    G: np.ndarray,
    cfg: DiffusionConfig,
    T: AffinityTransforms | None = None,
) -> np.ndarray:
    """One diffusion update over the whole map.

    Every pixel with at least one valid neighbour in its window (itself
    included) becomes the conductance-weighted average of those neighbours,
    with the softmax taken over valid neighbours only. All reads come from
    ``P``; the input is never modified.
    """
    if P.shape != G.shape[:2]:
        raise InvalidInputError(f"plane-origin map {P.shape} and guidance {G.shape[:2]} differ in size")
    H, W = P.shape
    r = cfg.kernel // 2
    ef, eg = embed(G, cfg, T)
    eg_pad = np.pad(eg, ((r, r), (r, r), (0, 0)))
    p_pad = np.pad(P, r)

    offsets = _offsets(cfg.kernel)
    A = np.empty((len(offsets), H, W))
    PJ = np.empty((len(offsets), H, W))
    for n, (dy, dx) in enumerate(offsets):
        rows = slice(r + dy, r + dy + H)
        cols = slice(r + dx, r + dx + W)
        A[n] = raw_affinity(ef, eg_pad[rows, cols], cfg)
        PJ[n] = p_pad[rows, cols]

    valid = PJ > 0
    has_any = valid.any(axis=0)
    A = np.where(valid, A, -np.inf)
    amax = np.where(has_any, A.max(axis=0), 0.0)
    E = np.where(valid, np.exp(A - amax), 0.0)
    denom = E.sum(axis=0)
    num = (E * PJ).sum(axis=0)
    return np.where(has_any, num / np.where(has_any, denom, 1.0), 0.0)


def replace_seeds(P: np.ndarray, P_seed: np.ndarray, M: np.ndarray) -> np.ndarray:
    """Blend seeds into ``P``: ``M * P_seed + (1 - M) * P`` where a seed exists.

    A seed landing on an invalid pixel of ``P`` is adopted as-is when its
    confidence is nonzero, since there is nothing to blend with.
    """
    if not (P.shape == P_seed.shape == M.shape):
        raise InvalidInputError(f"shape mismatch: {P.shape}, {P_seed.shape}, {M.shape}")
    seeds = P_seed > 0
    blended = M * P_seed + (1.0 - M) * P
    out = np.where(seeds, blended, P)
    return np.where(seeds & ~(P > 0) & (M > 0), P_seed, out)


def refine(
    D: np.ndarray,
    D_sparse: np.ndarray,
    N: np.ndarray,
    M: np.ndarray,
    K: Intrinsics,
    G: np.ndarray,
    cfg: DiffusionConfig | None = None,
    T: AffinityTransforms | None = None,
    callback=None,
) -> np.ndarray:
    """Refine coarse depth ``D`` with sparse seeds ``D_sparse``.

    ``callback(i, P)`` is called after each iteration with the current
    plane-origin map, if given.
    """
    cfg = cfg or DiffusionConfig()
    if not (D.shape == D_sparse.shape == M.shape == G.shape[:2] == N.shape[:2] == K.shape):
        raise InvalidInputError("refine inputs must share the intrinsics' grid size")
    P = depth_to_plane_origin(D, N, K, cfg.eps_ray)
    P_seed = depth_to_plane_origin(D_sparse, N, K, cfg.eps_ray)
    conf = M if cfg.use_confidence else np.ones_like(M)
    for i in range(cfg.iterations):
        if cfg.use_replacement:
            P = replace_seeds(P, P_seed, conf)
        P = diffuse_step(P, G, cfg, T)
        if callback is not None:
            callback(i, P)
    return plane_origin_to_depth(P, N, K, cfg.eps_ray)


def ablation_config(name: str, cfg: DiffusionConfig) -> DiffusionConfig | None:
    """Config for the named ablation, or None for ``w/o-refinement``."""
    if name == "full":
        return cfg
    if name == "w/o-refinement":
        return None
    if name == "w/o-replacement":
        return replace(cfg, use_replacement=False)
    if name == "w/o-confidence":
        return replace(cfg, use_confidence=False)
    if name in VARIANTS:
        return replace(cfg, variant=name)
    raise InvalidInputError(f"unknown ablation {name!r}; choose from {ABLATIONS}")


def ablate(
    name: str,
    D: np.ndarray,
    D_sparse: np.ndarray,
    N: np.ndarray,
    M: np.ndarray,
    K: Intrinsics,
    G: np.ndarray,
    cfg: DiffusionConfig | None = None,
    T: AffinityTransforms | None = None,
) -> np.ndarray:
    """Run ``refine`` with one component switched off or swapped."""
    sub = ablation_config(name, cfg or DiffusionConfig())
    if sub is None:
        return D.copy()
    return refine(D, D_sparse, N, M, K, G, sub, T)
