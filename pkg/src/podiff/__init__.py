"""Sparse-to-dense depth completion by diffusion in plane-origin distance space."""

from .camera import Intrinsics, backproject, project, ray_grid
from .diffusion import (
    AffinityTransforms,
    DiffusionConfig,
    ablate,
    conductance_weights,
    diffuse_step,
    refine,
    replace_seeds,
)
from .errors import (
    ConfigError,
    DepthFormatError,
    EmptyEvaluationError,
    InvalidInputError,
    PodiffError,
    SceneSpecError,
)
from .frontend import build_guidance, coarse_from_sparse, confidence_from_residual, estimate_normals
from .metrics import MetricReport, evaluate
from .plane_origin import depth_to_plane_origin, plane_origin_to_depth
from .scenes import SamplePattern, SceneSpec, inject_noise, load_preset, render_scene, sample_sparse

__version__ = "0.1.0"

__all__ = [
    "Intrinsics",
    "backproject",
    "project",
    "ray_grid",
    "AffinityTransforms",
    "DiffusionConfig",
    "ablate",
    "conductance_weights",
    "diffuse_step",
    "refine",
    "replace_seeds",
    "ConfigError",
    "DepthFormatError",
    "EmptyEvaluationError",
    "InvalidInputError",
    "PodiffError",
    "SceneSpecError",
    "build_guidance",
    "coarse_from_sparse",
    "confidence_from_residual",
    "estimate_normals",
    "MetricReport",
    "evaluate",
    "depth_to_plane_origin",
    "plane_origin_to_depth",
    "SamplePattern",
    "SceneSpec",
    "inject_noise",
    "load_preset",
    "render_scene",
    "sample_sparse",
]
