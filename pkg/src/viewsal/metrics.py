"""Saliency evaluation metrics on equirectangular maps.

Equirectangular pixels cover unequal solid angles, so by default every
pixel statistic is weighted by sin(phi) of its row; pass
``area_weighted=False`` to reproduce plain planar behavior for
cross-checks.  Fixation maps are integer count grids as produced by
:func:`viewsal.gaze.build_fixation_map`.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "auc_judd",
    "nss",
    "kl_divergence",
    "cc",
    "FrameMetrics",
    "EvaluationReport",
]

KL_EPSILON = 1e-12


def _area_weights(shape: tuple[int, int], area_weighted: bool) -> np.ndarray:
    if not area_weighted:
        return np.ones(shape)
    height, width = shape
    phi = (np.arange(height) + 0.5) * math.pi / height
    return np.repeat(np.sin(phi)[:, np.newaxis], width, axis=1)


def _check_same_shape(a: np.ndarray, b: np.ndarray):
    if a.shape != b.shape:
        raise ValueError(f"maps must share a shape, got {a.shape} vs {b.shape}")


def auc_judd(pred: np.ndarray, fixations: np.ndarray, *, area_weighted: bool = True) -> float:
    """ROC area of the prediction against the fixation pixels.

    Thresholds sweep the predicted values at fixation locations; the
    true-positive rate counts fixation pixels and the false-positive
    rate is the (area-weighted) fraction of non-fixation pixels at or
    above threshold.  Trapezoidal integration over the curve, with
    (0, 0) and (1, 1) end points.
    """
    pred = np.asarray(pred, dtype=float)
    fixations = np.asarray(fixations)
    _check_same_shape(pred, fixations)
    fix_mask = fixations > 0
    n_fix = int(np.count_nonzero(fix_mask))
    if n_fix == 0:
        raise ValueError("AUC needs at least one fixation")

    weights = _area_weights(pred.shape, area_weighted)
    fix_values = np.sort(pred[fix_mask])
    neg_values = pred[~fix_mask]
    neg_weights = weights[~fix_mask]
    order = np.argsort(neg_values)
    neg_sorted = neg_values[order]
    # Suffix sums give the negative weight at or above any threshold.
    neg_cum = np.concatenate([np.cumsum(neg_weights[order][::-1])[::-1], [0.0]])
    neg_total = neg_cum[0]

    thresholds = np.unique(fix_values)[::-1]
    tpr = 1.0 - np.searchsorted(fix_values, thresholds, side="left") / n_fix
    if neg_total > 0:
        fpr = neg_cum[np.searchsorted(neg_sorted, thresholds, side="left")] / neg_total
    else:
        fpr = np.zeros_like(tpr)
    tpr = np.concatenate([[0.0], tpr, [1.0]])
    fpr = np.concatenate([[0.0], fpr, [1.0]])
    return float(np.trapezoid(tpr, fpr))


def nss(pred: np.ndarray, fixations: np.ndarray, *, area_weighted: bool = True) -> float:
    """Mean standardized prediction value at the fixations.

    The prediction is standardized to zero mean and unit standard
    deviation using (area-weighted) moments; the return value is the
    fixation-count-weighted mean of the standardized map.
    """
    pred = np.asarray(pred, dtype=float)
    fixations = np.asarray(fixations)
    _check_same_shape(pred, fixations)
    if not (fixations > 0).any():
        raise ValueError("NSS needs at least one fixation")

    weights = _area_weights(pred.shape, area_weighted)
    total = weights.sum()
    mean = float((pred * weights).sum() / total)
    var = float(((pred - mean) ** 2 * weights).sum() / total)
    if var == 0.0:
        raise ValueError("NSS is undefined for a constant prediction")
    z = (pred - mean) / math.sqrt(var)
    counts = fixations.astype(float)
    return float((z * counts).sum() / counts.sum())


def kl_divergence(
    pred: np.ndarray,
    gt: np.ndarray,
    *,
    area_weighted: bool = True,
    eps: float = KL_EPSILON,
    pred_as_reference: bool = False,
) -> float:
    """KL divergence (nats) between the two maps as distributions.

    Both maps are converted to probabilities over pixels (values times
    pixel area, plus ``eps`` against empty bins, renormalized).  The
    ground truth is the reference by default, penalizing predictions
    that miss ground-truth mass; flip ``pred_as_reference`` for the
    other direction.
    """
    pred = np.asarray(pred, dtype=float)
    gt = np.asarray(gt, dtype=float)
    _check_same_shape(pred, gt)
    weights = _area_weights(pred.shape, area_weighted)

    def distribution(values: np.ndarray) -> np.ndarray:
        mass = values * weights + eps
        return mass / mass.sum()

    p = distribution(gt)
    q = distribution(pred)
    if pred_as_reference:
        p, q = q, p
    return float((p * np.log(p / q)).sum())


def cc(pred: np.ndarray, gt: np.ndarray, *, area_weighted: bool = True) -> float:
    """Pearson correlation between the maps with area-weighted moments."""
    pred = np.asarray(pred, dtype=float)
    gt = np.asarray(gt, dtype=float)
    _check_same_shape(pred, gt)
    weights = _area_weights(pred.shape, area_weighted)
    total = weights.sum()

    mean_p = (pred * weights).sum() / total
    mean_g = (gt * weights).sum() / total
    dp = pred - mean_p
    dg = gt - mean_g
    var_p = (dp * dp * weights).sum() / total
    var_g = (dg * dg * weights).sum() / total
    if var_p == 0.0 or var_g == 0.0:
        raise ValueError("correlation is undefined for a constant map")
    cov = (dp * dg * weights).sum() / total
    return float(cov / math.sqrt(var_p * var_g))


@dataclass
class FrameMetrics:
    frame_index: int
    auc_judd: float
    nss: float
    kl: float
    cc: float


@dataclass
class EvaluationReport:
    """Per-frame metric rows plus the packed-map summary of one video."""

    frames: list[FrameMetrics]
    packed: FrameMetrics | None = None

    _FIELDS = ("auc_judd", "nss", "kl", "cc")

    def mean(self) -> dict[str, float]:
        return {
            f: float(np.mean([getattr(row, f) for row in self.frames]))
            for f in self._FIELDS
        }

    def std(self) -> dict[str, float]:
        return {
            f: float(np.std([getattr(row, f) for row in self.frames]))
            for f in self._FIELDS
        }

    def write_csv(self, path: str | Path):
        """Rows of ``frame_index,auc_judd,nss,kl,cc`` plus summary rows
        (mean, std and the packed-map computation).  Atomic write."""
        from .formats import atomic_write_bytes

        buffer = io.StringIO()
        writer = csv.writer(buffer)
        writer.writerow(["frame_index", "auc_judd", "nss", "kl", "cc"])
        for row in self.frames:
            writer.writerow([row.frame_index, row.auc_judd, row.nss, row.kl, row.cc])
        if self.frames:
            mean = self.mean()
            std = self.std()
            writer.writerow(["mean"] + [mean[f] for f in self._FIELDS])
            writer.writerow(["std"] + [std[f] for f in self._FIELDS])
        if self.packed is not None:
            writer.writerow(
                ["packed", self.packed.auc_judd, self.packed.nss,
                 self.packed.kl, self.packed.cc]
            )
        atomic_write_bytes(path, buffer.getvalue().encode())
