"""Experiment harness: synthesise inputs, run refinement variants, score them.

Random streams are derived from the config seed and the scene name only, so
a scene produces the same seeds, outliers and coarse perturbation no matter
which other scenes or sweep points share the run. Uniform sampling draws a
prefix of one fixed permutation, so sweeping the seed ratio yields nested
seed sets.
"""

from __future__ import annotations

import csv
import io
import logging
import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import depth_io
from .camera import Intrinsics
from .config import ExperimentConfig
from .diffusion import AffinityTransforms, DiffusionConfig, ablation_config, refine
from .errors import PodiffError
from .frontend import build_guidance, coarse_from_sparse, confidence_from_residual, estimate_normals
from .metrics import CSV_COLUMNS, MetricReport, evaluate
from .scenes import SceneSpec, boundary_mask, inject_noise, render_scene, sample_sparse

logger = logging.getLogger(__name__)

_STREAM_SAMPLING, _STREAM_NOISE, _STREAM_COARSE = 0, 1, 2


class StageError(PodiffError):
    """A pipeline stage failed; ``stage`` names it."""

    def __init__(self, stage: str, scene: str, exc: Exception):
        super().__init__(f"stage '{stage}' failed on scene '{scene}': {exc}")
        self.stage = stage


def stream_seed(seed: int, scene: str, stream: int) -> int:
    ss = np.random.SeedSequence([seed, zlib.crc32(scene.encode()), stream])
    return int(ss.generate_state(1, dtype=np.uint32)[0])


@dataclass
class SceneInputs:
    name: str
    K: Intrinsics
    gt: np.ndarray
    labels: np.ndarray
    sparse: np.ndarray
    coarse: np.ndarray
    normals: np.ndarray
    confidence: np.ndarray
    guidance: np.ndarray

    @property
    def n_seeds(self) -> int:
        return int((self.sparse > 0).sum())


class _Stage:
    def __init__(self, scene: str):
        self.scene = scene
        self.name = ""

    def __call__(self, name: str):
        self.name = name
        return self

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc is not None and not isinstance(exc, StageError) and isinstance(exc, Exception):
            raise StageError(self.name, self.scene, exc) from exc
        return False


def prepare(spec: SceneSpec, cfg: ExperimentConfig) -> SceneInputs:
    """Render ground truth and build every refinement input for one scene."""
    d = cfg.data
    stage = _Stage(spec.name)
    K = spec.camera
    with stage("render"):
        gt, gt_normals, labels = render_scene(spec)
    with stage("sample"):
        sparse = sample_sparse(gt, cfg.sample_pattern(stream_seed(cfg.seed, spec.name, _STREAM_SAMPLING)))
    with stage("noise"):
        nz = d["noise"]
        if nz["outlier_frac"] > 0:
            sparse = inject_noise(
                sparse,
                nz["outlier_frac"],
                nz["magnitude"],
                seed=stream_seed(cfg.seed, spec.name, _STREAM_NOISE),
                boundary=boundary_mask(labels),
                boundary_bias=nz["boundary_bias"],
            )
    fe = d["frontend"]
    with stage("coarse"):
        if d["coarse"]["mode"] == "idw":
            coarse = coarse_from_sparse(sparse, fe["k"], fe["p"])
        else:
            rng = np.random.default_rng(stream_seed(cfg.seed, spec.name, _STREAM_COARSE))
            amp = d["coarse"]["amplitude"]
            coarse = gt * (1.0 + rng.uniform(-amp, amp, gt.shape))
    with stage("normals"):
        normals = gt_normals if d["normals"]["mode"] == "exact" else estimate_normals(coarse, K, fe["w"])
    with stage("confidence"):
        confidence = confidence_from_residual(sparse, coarse, fe["b"])
    with stage("guidance"):
        guidance = build_guidance(coarse, normals, fe["depth_max"], fe["channels"])
    return SceneInputs(spec.name, K, gt, labels, sparse, coarse, normals, confidence, guidance)


def run_variant(
    inputs: SceneInputs,
    dcfg: DiffusionConfig,
    T: AffinityTransforms | None,
    ablation: str = "full",
) -> np.ndarray:
    sub = ablation_config(ablation, dcfg)
    if sub is None:
        return inputs.coarse.copy()
    with _Stage(inputs.name)("refine"):
        return refine(
            inputs.coarse,
            inputs.sparse,
            inputs.normals,
            inputs.confidence,
            inputs.K,
            inputs.guidance,
            sub,
            T,
        )


@dataclass
class Row:
    scene: str
    variant: str
    kernel: int
    iterations: int
    seeds: int
    noise: float
    report: MetricReport

    def cells(self) -> list[str]:
        return self.report.csv_row(self.scene, self.variant, self.kernel, self.iterations, self.seeds, self.noise)


def rows_to_csv(rows: list[Row]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for row in rows:
        writer.writerow(row.cells())
    return buf.getvalue()


def _label(overrides: dict) -> str:
    return ",".join(f"{k}={v}" for k, v in overrides.items())


def _safe(name: str) -> str:
    return name.replace("/", "-").replace(",", "_").replace("=", "-")


def _write_maps(outdir: Path, prefix: str, depth: np.ndarray) -> None:
    depth_io.write_depth_png(outdir / f"{prefix}.png", depth)
    depth_io.write_depth_raw(outdir / f"{prefix}.f32", depth)


@dataclass
class Result:
    rows: list[Row]
    coarse_rows: list[Row]

    @property
    def csv(self) -> str:
        return rows_to_csv(self.rows)


def _evaluate_point(cfg: ExperimentConfig, ablations, label: str, out: Path | None) -> tuple[list[Row], list[Row]]:
    dcfg = cfg.diffusion()
    T = cfg.affinity()
    noise = cfg.data["noise"]["outlier_frac"]
    rows, coarse_rows = [], []
    for spec in cfg.scenes():
        inputs = prepare(spec, cfg)
        coarse_report = evaluate(inputs.coarse, inputs.gt)
        coarse_rows.append(
            Row(spec.name, "coarse" + (f"|{label}" if label else ""), dcfg.kernel, dcfg.iterations, inputs.n_seeds, noise, coarse_report)
        )
        scene_dir = None
        if out is not None:
            scene_dir = out / _safe(spec.name) / (_safe(label) or "base")
            scene_dir.mkdir(parents=True, exist_ok=True)
            _write_maps(scene_dir, "gt", inputs.gt)
            _write_maps(scene_dir, "coarse", inputs.coarse)
            _write_maps(scene_dir, "sparse", inputs.sparse)
            depth_io.write_confidence_png(scene_dir / "confidence.png", inputs.confidence)
        for ablation in ablations:
            refined = run_variant(inputs, dcfg, T, ablation)
            with _Stage(spec.name)("evaluate"):
                report = evaluate(refined, inputs.gt)
            if report.invalid_count:
                logger.warning("%s/%s: %d pixels left invalid", spec.name, ablation, report.invalid_count)
            variant = ablation + (f"|{label}" if label else "")
            rows.append(Row(spec.name, variant, dcfg.kernel, dcfg.iterations, inputs.n_seeds, noise, report))
            logger.info("%-14s %-34s rmse %10.3f mm", spec.name, variant, report.rmse)
            if scene_dir is not None:
                _write_maps(scene_dir, "refined" if ablation == "full" else _safe(ablation), refined)
    return rows, coarse_rows


def execute(cfg: ExperimentConfig, mode: str = "run", out: Path | None = None) -> Result:
    """Run an experiment.

    ``mode`` is ``run`` (base point plus any declared sweeps, full model),
    ``sweep`` (same, but sweeps must be declared) or ``ablate`` (every
    configured ablation at the base point). Writes ``metrics.csv``,
    ``coarse_metrics.csv``, the resolved ``config.json`` and per-scene depth
    maps under ``out`` when it is given.
    """
    if mode == "ablate":
        points = [{}]
        ablations = list(cfg.data["ablations"])
    else:
        if mode == "sweep" and not cfg.data["sweeps"]:
            raise PodiffError("sweep requested but the config declares no sweeps")
        points = cfg.sweep_points()
        ablations = ["full"]

    rows, coarse_rows = [], []
    for overrides in points:
        point_cfg = cfg.with_overrides(overrides)
        r, c = _evaluate_point(point_cfg, ablations, _label(overrides), out)
        rows.extend(r)
        coarse_rows.extend(c)

    result = Result(rows, coarse_rows)
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        (out / "metrics.csv").write_text(result.csv)
        (out / "coarse_metrics.csv").write_text(rows_to_csv(coarse_rows))
        (out / "config.json").write_text(cfg.to_json() + "\n")
    return result
