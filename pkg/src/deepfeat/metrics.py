"""Confusion matrix and derived classification metrics.

Per-class precision, recall, and F1 follow the one-vs-rest convention
with zero-filled values on empty denominators.  Aggregation is either
support-weighted (default) or macro.  All ratios are computed with
exact rational arithmetic and converted to float at the end, so the
algebraic identity weighted recall == accuracy holds exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from decimal import Decimal, ROUND_HALF_UP
from fractions import Fraction

import numpy as np

AVERAGING_MODES = ("weighted", "macro")


class MetricsError(ValueError):
    """Invalid confusion matrix or label vectors."""


@dataclass(frozen=True)
class ConfusionMatrix:
    """Square count matrix with rows = true class, columns = predicted."""

    counts: np.ndarray

    def __post_init__(self) -> None:
        arr = np.array(self.counts, dtype=np.int64, copy=True)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise MetricsError(f"confusion matrix must be square, got shape {arr.shape}")
        if arr.shape[0] < 1:
            raise MetricsError("confusion matrix must have at least one class")
        if (arr < 0).any():
            raise MetricsError("confusion matrix counts must be non-negative")
        if arr.sum() < 1:
            raise MetricsError("confusion matrix must count at least one sample")
        arr.setflags(write=False)
        object.__setattr__(self, "counts", arr)

    @property
    def n_classes(self) -> int:
        return int(self.counts.shape[0])

    @property
    def total(self) -> int:
        return int(self.counts.sum())


@dataclass(frozen=True)
class MetricRow:
    accuracy: float
    precision: float
    recall: float
    f1: float
    averaging: str
    support: tuple[int, ...]


def confusion_matrix(y_true, y_pred, n_classes: int) -> ConfusionMatrix:
    t = np.asarray(y_true, dtype=np.int64)
    p = np.asarray(y_pred, dtype=np.int64)
    if t.shape != p.shape or t.ndim != 1:
        raise MetricsError(f"label vectors must be 1-D and equal length, "
                           f"got {t.shape} and {p.shape}")
    if t.size < 1:
        raise MetricsError("need at least one sample")
    for name, v in (("true", t), ("predicted", p)):
        if v.min() < 0 or v.max() >= n_classes:
            raise MetricsError(f"{name} labels must lie in [0, {n_classes})")
    counts = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(counts, (t, p), 1)
    return ConfusionMatrix(counts)


def per_class_metrics(cm: ConfusionMatrix) -> tuple[list[Fraction], list[Fraction], list[Fraction]]:
    """One-vs-rest precision, recall, F1 per class as exact fractions."""
    counts = cm.counts
    precision, recall, f1 = [], [], []
    for c in range(cm.n_classes):
        tp = int(counts[c, c])
        pred = int(counts[:, c].sum())
        true = int(counts[c, :].sum())
        p = Fraction(tp, pred) if pred else Fraction(0)
        r = Fraction(tp, true) if true else Fraction(0)
        f = 2 * p * r / (p + r) if (p + r) else Fraction(0)
        precision.append(p)
        recall.append(r)
        f1.append(f)
    return precision, recall, f1


def classification_report(cm: ConfusionMatrix, averaging: str = "weighted") -> MetricRow:
    if averaging not in AVERAGING_MODES:
        raise MetricsError(f"averaging must be one of {AVERAGING_MODES}, got '{averaging}'")
    counts = cm.counts
    support = tuple(int(s) for s in counts.sum(axis=1))
    total = cm.total
    accuracy = Fraction(int(np.trace(counts)), total)
    precision, recall, f1 = per_class_metrics(cm)
    if averaging == "weighted":
        agg = lambda vals: sum(Fraction(s) * v for s, v in zip(support, vals)) / total
    else:
        agg = lambda vals: sum(vals, Fraction(0)) / cm.n_classes
    return MetricRow(
        accuracy=float(accuracy),
        precision=float(agg(precision)),
        recall=float(agg(recall)),
        f1=float(agg(f1)),
        averaging=averaging,
        support=support,
    )


def format_metric(x: float) -> str:
    """Format a metric value with half-up rounding to 3 decimals.

    Trailing zeros are trimmed, mirroring how result tables are usually
    printed (0.87 rather than 0.870, 0.8675 -> 0.868).
    """
    q = Decimal(str(float(x))).quantize(Decimal("0.001"), rounding=ROUND_HALF_UP)
    s = format(q, "f")
    if "." in s:
        s = s.rstrip("0").rstrip(".")
    return s if s else "0"
