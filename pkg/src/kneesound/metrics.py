"""Binary evaluation metrics. Abnormal is the positive class (+1).

Degenerate denominators follow one rule: a ratio whose denominator is zero
scores 0, so single-class predictions are penalised rather than crashing.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import EmptyInputError, EvaluationError


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    tn: int
    fn: int

    @classmethod
    def from_predictions(cls, y_true, y_pred) -> "ConfusionMatrix":
        yt = np.asarray(y_true)
        yp = np.asarray(y_pred)
        if yt.shape != yp.shape:
            raise ValueError("y_true and y_pred differ in length")
        if yt.size == 0:
            raise EmptyInputError("no predictions to score")
        pos = yt > 0
        pred_pos = yp > 0
        return cls(
            tp=int(np.sum(pos & pred_pos)),
            fp=int(np.sum(~pos & pred_pos)),
            tn=int(np.sum(~pos & ~pred_pos)),
            fn=int(np.sum(pos & ~pred_pos)),
        )

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


def error_rate(cm: ConfusionMatrix) -> float:
    if cm.total == 0:
        raise EmptyInputError("empty confusion matrix")
    return (cm.fp + cm.fn) / cm.total


def f_beta(cm: ConfusionMatrix, beta: float = 0.5) -> float:
    """F_beta of the abnormal class; 0 when precision and recall are both 0."""
    precision = cm.tp / (cm.tp + cm.fp) if (cm.tp + cm.fp) else 0.0
    recall = cm.tp / (cm.tp + cm.fn) if (cm.tp + cm.fn) else 0.0
    b2 = beta * beta
    denom = b2 * precision + recall
    if denom == 0.0:
        return 0.0
    return (1.0 + b2) * precision * recall / denom


def mcc(cm: ConfusionMatrix) -> float:
    """Matthews correlation; 0 when any marginal is empty."""
    denom = (
        (cm.tp + cm.fp) * (cm.tp + cm.fn) * (cm.tn + cm.fp) * (cm.tn + cm.fn)
    )
    if denom == 0:
        return 0.0
    return (cm.tp * cm.tn - cm.fp * cm.fn) / math.sqrt(denom)


def s_score(mcc_value: float, er: float, f05: float) -> float:
    """Composite summary: mean of MCC, accuracy (1 - E_r) and F_0.5."""
    return (mcc_value + (1.0 - er) + f05) / 3.0


@dataclass
class RocCurve:
    """Operating points from a descending-threshold sweep, plus the area.

    Tied scores move as one block, which makes the trapezoidal area equal
    to the tie-corrected Mann-Whitney statistic.
    """

    thresholds: np.ndarray
    fpr: np.ndarray
    tpr: np.ndarray
    auc: float


def roc_auc(scores, labels) -> RocCurve:
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels)
    if s.shape != y.shape or s.ndim != 1:
        raise ValueError("scores and labels must be matching 1-D arrays")
    if not np.all(np.isfinite(s)):
        raise EvaluationError("non-finite scores in ROC input")
    n_pos = int(np.sum(y > 0))
    n_neg = int(np.sum(y < 0))
    if n_pos == 0 or n_neg == 0:
        raise EvaluationError("ROC needs both classes present")
    order = np.argsort(-s, kind="mergesort")
    ss = s[order]
    yy = y[order]
    tps = np.cumsum(yy > 0)
    fps = np.cumsum(yy < 0)
    ends = np.r_[np.flatnonzero(np.diff(ss) != 0.0), ss.size - 1]
    tpr = np.r_[0.0, tps[ends] / n_pos]
    fpr = np.r_[0.0, fps[ends] / n_neg]
    thresholds = np.r_[np.inf, ss[ends]]
    auc = float(np.trapezoid(tpr, fpr))
    return RocCurve(thresholds, fpr, tpr, auc)


def roc_to_csv(curve: RocCurve, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["threshold", "fpr", "tpr"])
        for t, f, r in zip(curve.thresholds, curve.fpr, curve.tpr):
            writer.writerow([repr(float(t)), repr(float(f)), repr(float(r))])
