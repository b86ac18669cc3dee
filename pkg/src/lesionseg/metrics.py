"""Confusion-matrix accounting, per-image metrics, dataset aggregation.

Degenerate divisions follow the convention that an all-background truth
compared against an all-background prediction scores perfectly: empty
denominators yield 1 for sensitivity, specificity, precision and Jaccard,
and the F-measure falls back to 0 only when precision + recall is 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .imagecore import _check_mask, _check_rgb

__all__ = [
    "ConfusionCounts",
    "MetricSet",
    "EvalRecord",
    "confusion",
    "metrics_from_counts",
    "aggregate",
    "render_overlay",
    "METRIC_NAMES",
    "OVERLAY_TP",
    "OVERLAY_TN",
    "OVERLAY_FN",
    "OVERLAY_FP",
]

METRIC_NAMES = ("sensitivity", "specificity", "accuracy", "f_measure", "jaccard")

OVERLAY_TP = (100, 180, 255)
OVERLAY_TN = (0, 0, 120)
OVERLAY_FN = (255, 220, 0)
OVERLAY_FP = (220, 30, 30)


@dataclass
class ConfusionCounts:
    tp: int
    tn: int
    fp: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn


@dataclass
class MetricSet:
    sensitivity: float
    specificity: float
    accuracy: float
    f_measure: float
    jaccard: float

    def as_dict(self) -> dict[str, float]:
        return {name: getattr(self, name) for name in METRIC_NAMES}


@dataclass
class EvalRecord:
    """One evaluated image: counts, derived metrics, and run descriptors."""

    image_id: str
    counts: ConfusionCounts
    metrics: MetricSet
    threshold: float
    regions_after_merge: int
    runtime_ms: float


def confusion(pred: np.ndarray, truth: np.ndarray) -> ConfusionCounts:
    """Pixelwise confusion counts of a predicted mask against the truth."""
    pred = _check_mask(pred)
    truth = _check_mask(truth)
    if pred.shape != truth.shape:
        raise ValueError("mask dimensions differ")
    tp = int(np.count_nonzero(pred & truth))
    fp = int(np.count_nonzero(pred & ~truth))
    fn = int(np.count_nonzero(~pred & truth))
    tn = pred.size - tp - fp - fn
    return ConfusionCounts(tp=tp, tn=tn, fp=fp, fn=fn)


def metrics_from_counts(c: ConfusionCounts) -> MetricSet:
    """Sensitivity, specificity, accuracy, F-measure (F1) and Jaccard."""
    if c.total <= 0:
        raise ValueError("confusion counts sum to zero")
    sens = c.tp / (c.tp + c.fn) if c.tp + c.fn else 1.0
    spec = c.tn / (c.tn + c.fp) if c.tn + c.fp else 1.0
    acc = (c.tp + c.tn) / c.total
    prec = c.tp / (c.tp + c.fp) if c.tp + c.fp else 1.0
    f = 2 * prec * sens / (prec + sens) if prec + sens else 0.0
    jac = c.tp / (c.tp + c.fp + c.fn) if c.tp + c.fp + c.fn else 1.0
    return MetricSet(sensitivity=sens, specificity=spec, accuracy=acc, f_measure=f, jaccard=jac)


def aggregate(records: list[EvalRecord]) -> dict[str, tuple[float, float]]:
    """Mean and population standard deviation for each metric."""
    if not records:
        raise ValueError("no records to aggregate")
    out = {}
    for name in METRIC_NAMES:
        values = np.array([getattr(r.metrics, name) for r in records], dtype=np.float64)
        out[name] = (float(values.mean()), float(values.std()))
    return out


def render_overlay(pred: np.ndarray, truth: np.ndarray, base: np.ndarray) -> np.ndarray:
    """Classification rendering: TP light blue, TN dark blue, FN yellow, FP red."""
    pred = _check_mask(pred)
    truth = _check_mask(truth)
    base = _check_rgb(base)
    if pred.shape != truth.shape or pred.shape != base.shape[:2]:
        raise ValueError("mask and image dimensions differ")
    out = np.empty_like(base)
    out[pred & truth] = OVERLAY_TP
    out[~pred & ~truth] = OVERLAY_TN
    out[~pred & truth] = OVERLAY_FN
    out[pred & ~truth] = OVERLAY_FP
    return out
