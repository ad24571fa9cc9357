"""Confusion-matrix statistics, ROC/AUROC, and cross-validation aggregation.

AUROC is computed by a threshold sweep with integer cumulative counts, so the
trapezoidal area equals the pairwise comparison statistic (fraction of
(positive, negative) pairs ranked correctly, ties counted 0.5) exactly up to
one final float division.

A rate whose denominator is zero is reported as None (undefined), never as 0;
fold aggregation excludes undefined values and notes how many were dropped.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import MetricsError

METRIC_NAMES = ("sensitivity", "specificity", "accuracy", "auroc")


@dataclass(frozen=True)
class ConfusionMatrix:
    TP: int
    FP: int
    TN: int
    FN: int

    @property
    def total(self) -> int:
        return self.TP + self.FP + self.TN + self.FN


@dataclass(frozen=True)
class RocCurve:
    """Ordered (FPR, TPR) points from a descending threshold sweep."""

    points: tuple[tuple[float, float], ...]


@dataclass(frozen=True)
class Aggregate:
    """Mean and spread of one metric over folds, with the undefined count."""

    mean: float
    std: float
    n_folds: int
    n_undefined: int = 0

    def formatted(self) -> str:
        return f"{self.mean:.4f} ± {self.std:.4f}"


@dataclass(frozen=True)
class MetricsReport:
    sensitivity: Aggregate
    specificity: Aggregate
    accuracy: Aggregate
    auroc: Aggregate
    notes: tuple[str, ...] = field(default_factory=tuple)

    def to_dict(self) -> dict:
        out = {}
        for name in METRIC_NAMES:
            agg: Aggregate = getattr(self, name)
            out[name] = {"mean": agg.mean, "std": agg.std,
                         "n_folds": agg.n_folds, "n_undefined": agg.n_undefined}
        if self.notes:
            out["notes"] = list(self.notes)
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    def table(self) -> str:
        """Plain-text row format: metric name, then mean ± std to 4 decimals."""
        width = max(len(n) for n in METRIC_NAMES)
        lines = [f"{name.ljust(width)}  {getattr(self, name).formatted()}"
                 for name in METRIC_NAMES]
        for note in self.notes:
            lines.append(f"note: {note}")
        return "\n".join(lines) + "\n"


def _validate_pair(scores, labels, op: str):
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.ndim != 1 or labels.ndim != 1 or scores.shape != labels.shape:
        raise MetricsError(f"{op}: scores and labels must be equal-length 1-D, "
                           f"got {scores.shape} and {labels.shape}")
    if scores.size == 0:
        raise MetricsError(f"{op}: empty input")
    if np.any(scores < 0.0) or np.any(scores > 1.0):
        raise MetricsError(f"{op}: scores must lie in [0, 1]")
    if not np.all((labels == 0) | (labels == 1)):
        raise MetricsError(f"{op}: labels must be 0 or 1")
    return scores, labels.astype(np.int64)


def confusion_at(scores, labels, threshold: float) -> ConfusionMatrix:
    """Count the confusion matrix; score >= threshold predicts positive."""
    scores, labels = _validate_pair(scores, labels, "confusion_at")
    if not 0.0 <= threshold <= 1.0:
        raise MetricsError(f"confusion_at: threshold {threshold} outside [0, 1]")
    pred = scores >= threshold
    pos = labels == 1
    return ConfusionMatrix(
        TP=int(np.sum(pred & pos)),
        FP=int(np.sum(pred & ~pos)),
        TN=int(np.sum(~pred & ~pos)),
        FN=int(np.sum(~pred & pos)),
    )


def rates(cm: ConfusionMatrix) -> dict[str, float | None]:
    """Sensitivity, specificity, accuracy; None where the denominator is zero."""
    if cm.total == 0:
        raise MetricsError("rates: all-zero confusion matrix")
    return {
        "sensitivity": cm.TP / (cm.TP + cm.FN) if cm.TP + cm.FN else None,
        "specificity": cm.TN / (cm.TN + cm.FP) if cm.TN + cm.FP else None,
        "accuracy": (cm.TP + cm.TN) / cm.total,
    }


def roc_curve(scores, labels) -> RocCurve:
    """Threshold-swept ROC from (0,0) to (1,1); needs both classes present."""
    scores, labels = _validate_pair(scores, labels, "roc_curve")
    P = int(np.sum(labels == 1))
    N = int(np.sum(labels == 0))
    if P == 0 or N == 0:
        raise MetricsError("roc_curve: need at least one positive and one negative")
    order = np.argsort(-scores, kind="stable")
    s = scores[order]
    y = labels[order]
    points = [(0.0, 0.0)]
    tp = fp = 0
    i = 0
    n = s.size
    while i < n:
        j = i
        while j < n and s[j] == s[i]:  # all samples at one score move together
            j += 1
        tp += int(np.sum(y[i:j] == 1))
        fp += int(np.sum(y[i:j] == 0))
        points.append((fp / N, tp / P))
        i = j
    return RocCurve(points=tuple(points))


def auroc(scores, labels) -> float:
    """Trapezoidal area under the ROC via integer cumulative counts."""
    scores, labels = _validate_pair(scores, labels, "auroc")
    P = int(np.sum(labels == 1))
    N = int(np.sum(labels == 0))
    if P == 0 or N == 0:
        raise MetricsError("auroc: need at least one positive and one negative")
    order = np.argsort(-scores, kind="stable")
    s = scores[order]
    y = labels[order]
    # 2x the unnormalized area, accumulated in exact integer arithmetic:
    # each score group contributes d_fp * (2*tp_before + d_tp).
    twice_area = 0
    tp = 0
    i = 0
    n = s.size
    while i < n:
        j = i
        while j < n and s[j] == s[i]:
            j += 1
        d_tp = int(np.sum(y[i:j] == 1))
        d_fp = (j - i) - d_tp
        twice_area += d_fp * (2 * tp + d_tp)
        tp += d_tp
        i = j
    return twice_area / (2 * P * N)


def aggregate_folds(per_fold: list[dict[str, float | None]],
                    population_std: bool = True) -> MetricsReport:
    """Mean and std of each metric over folds; undefined values are excluded.

    ``population_std`` selects the ddof=0 deviation the result tables use;
    set False for the sample (ddof=1) convention.
    """
    if not per_fold:
        raise MetricsError("aggregate_folds: empty fold list")
    notes: list[str] = []
    aggs: dict[str, Aggregate] = {}
    for name in METRIC_NAMES:
        vals = [f[name] for f in per_fold if f.get(name) is not None]
        n_undef = len(per_fold) - len(vals)
        if n_undef:
            notes.append(f"{name}: {n_undef} undefined fold value(s) excluded")
        if not vals:
            raise MetricsError(f"aggregate_folds: metric {name!r} undefined in every fold")
        arr = np.asarray(vals, dtype=np.float64)
        if np.ptp(arr) == 0.0:  # identical folds: exactly zero spread
            mean_v, std_v = float(arr[0]), 0.0
        else:
            ddof = 0 if population_std else 1
            mean_v, std_v = float(arr.mean()), float(arr.std(ddof=ddof))
        aggs[name] = Aggregate(mean=mean_v, std=std_v,
                               n_folds=len(vals), n_undefined=n_undef)
    return MetricsReport(notes=tuple(notes), **aggs)


def fold_metrics(scores, labels, threshold: float = 0.5) -> dict[str, float | None]:
    """One fold's metric dict: thresholded rates plus AUROC."""
    cm = confusion_at(scores, labels, threshold)
    out = rates(cm)
    out["auroc"] = auroc(scores, labels)
    return out
