"""Depth completion error metrics.

Units follow the KITTI benchmark: RMSE/MAE in millimetres, iRMSE/iMAE in
1/km. ``rel`` and the delta accuracies are unitless; deltas are percentages.
Only pixels valid in both prediction and ground truth are scored.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .errors import EmptyEvaluationError, InvalidInputError

DELTA_THRESHOLDS = (1.25, 1.25**2, 1.25**3)

CSV_COLUMNS = (
    "scene",
    "variant",
    "kernel",
    "iterations",
    "seeds",
    "noise",
    "rmse",
    "mae",
    "irmse",
    "imae",
    "rel",
    "d1",
    "d2",
    "d3",
    "pixels",
)


@dataclass(frozen=True)
class MetricReport:
    rmse: float
    mae: float
    irmse: float
    imae: float
    rel: float
    d1: float
    d2: float
    d3: float
    pixel_count: int
    # ground-truth pixels the prediction left invalid; reported, not penalised
    invalid_count: int = 0

    @property
    def delta(self) -> dict[float, float]:
        return dict(zip(DELTA_THRESHOLDS, (self.d1, self.d2, self.d3)))

    def in_meters(self) -> dict:
        """NYU-style view: depth errors in metres, inverse-depth errors in 1/m."""
        d = asdict(self)
        for key in ("rmse", "mae", "irmse", "imae"):
            d[key] = d[key] / 1000.0
        return d

    def csv_row(self, scene: str, variant: str, kernel: int, iterations: int, seeds: int, noise: float) -> list[str]:
        values = [self.rmse, self.mae, self.irmse, self.imae, self.rel, self.d1, self.d2, self.d3]
        return [scene, variant, str(kernel), str(iterations), str(seeds), f"{noise:g}"] + [
            f"{v:.6f}" for v in values
        ] + [str(self.pixel_count)]


def evaluate(pred: np.ndarray, gt: np.ndarray) -> MetricReport:
    if pred.shape != gt.shape:
        raise InvalidInputError(f"prediction {pred.shape} and ground truth {gt.shape} differ in size")
    gt_valid = (gt > 0) & np.isfinite(gt)
    pred_valid = (pred > 0) & np.isfinite(pred)
    mask = gt_valid & pred_valid
    n = int(mask.sum())
    if n == 0:
        raise EmptyEvaluationError("no pixel is valid in both prediction and ground truth")

    d, g = pred[mask], gt[mask]
    err = d - g
    ierr = 1.0 / d - 1.0 / g
    ratio = np.maximum(d / g, g / d)
    return MetricReport(
        rmse=float(np.sqrt(np.mean(err**2)) * 1000.0),
        mae=float(np.mean(np.abs(err)) * 1000.0),
        irmse=float(np.sqrt(np.mean(ierr**2)) * 1000.0),
        imae=float(np.mean(np.abs(ierr)) * 1000.0),
        rel=float(np.mean(np.abs(err) / g)),
        d1=float(100.0 * np.mean(ratio < DELTA_THRESHOLDS[0])),
        d2=float(100.0 * np.mean(ratio < DELTA_THRESHOLDS[1])),
        d3=float(100.0 * np.mean(ratio < DELTA_THRESHOLDS[2])),
        pixel_count=n,
        invalid_count=int((gt_valid & ~pred_valid).sum()),
    )
