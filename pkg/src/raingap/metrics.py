"""
Classification and regression scores for final precipitation predictions.

Accuracy is reported in percent, the other classification scores as fractions.
Zero denominators give 0 (precision, recall, F1) because all-zero prediction
vectors occur legitimately.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .exceptions import MetricError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def n(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    @classmethod
    def from_labels(cls, truth: np.ndarray, pred: np.ndarray) -> "ConfusionCounts":
        truth = np.asarray(truth).astype(bool)
        pred = np.asarray(pred).astype(bool)
        return cls(
            tp=int(np.sum(truth & pred)),
            fp=int(np.sum(~truth & pred)),
            tn=int(np.sum(~truth & ~pred)),
            fn=int(np.sum(truth & ~pred)),
        )


def _ratio(num: float, den: float) -> float:
    return num / den if den else 0.0


def _f1(precision: float, recall: float) -> float:
    return _ratio(2.0 * precision * recall, precision + recall)


@dataclass(frozen=True)
class ClassificationScores:
    counts: ConfusionCounts
    accuracy: float
    precision: float
    recall: float
    f1: float
    weighted_f1: float


def scores_from_counts(counts: ConfusionCounts) -> ClassificationScores:
    """Accuracy (%), precision, recall, F1 and support-weighted F1 from confusion counts."""
    precision = _ratio(counts.tp, counts.tp + counts.fp)
    recall = _ratio(counts.tp, counts.tp + counts.fn)
    f1 = _f1(precision, recall)
    # class 0 taken as the positive class
    precision0 = _ratio(counts.tn, counts.tn + counts.fn)
    recall0 = _ratio(counts.tn, counts.tn + counts.fp)
    f1_0 = _f1(precision0, recall0)
    support1 = counts.tp + counts.fn
    support0 = counts.tn + counts.fp
    weighted = _ratio(support0 * f1_0 + support1 * f1, counts.n)
    accuracy = 100.0 * _ratio(counts.tp + counts.tn, counts.n)
    return ClassificationScores(counts, accuracy, precision, recall, f1, weighted)


def classification_metrics(truth: Sequence[int], pred: Sequence[int]) -> ClassificationScores:
    """
    Score binary predictions.

    Raises:
        MetricError: On a length mismatch or empty input
    """
    truth = np.asarray(truth)
    pred = np.asarray(pred)
    if truth.shape != pred.shape:
        raise MetricError(f"length mismatch: truth {truth.shape}, prediction {pred.shape}")
    if truth.size == 0:
        raise MetricError("cannot score an empty prediction vector")
    return scores_from_counts(ConfusionCounts.from_labels(truth, pred))


def regression_metrics(truth: Sequence[float], pred: Sequence[float]) -> Tuple[Optional[float], float]:
    """
    R^2 and RMSE of amplitude predictions in mm.

    Returns:
        (r2, rmse); r2 is None when the truth is constant

    Raises:
        MetricError: On a length mismatch or fewer than 2 samples
    """
    truth = np.asarray(truth, dtype=float)
    pred = np.asarray(pred, dtype=float)
    if truth.shape != pred.shape:
        raise MetricError(f"length mismatch: truth {truth.shape}, prediction {pred.shape}")
    if truth.size < 2:
        raise MetricError(f"R^2 needs at least 2 samples, got {truth.size}")
    errors = truth - pred
    ss_res = float(np.sum(errors**2))
    rmse = math.sqrt(ss_res / truth.size)
    ss_tot = float(np.sum((truth - truth.mean()) ** 2))
    r2 = None if ss_tot == 0 else 1.0 - ss_res / ss_tot
    return r2, rmse


def rmse(truth: Sequence[float], pred: Sequence[float]) -> float:
    truth = np.asarray(truth, dtype=float)
    pred = np.asarray(pred, dtype=float)
    if truth.shape != pred.shape or truth.size == 0:
        raise MetricError("RMSE needs equal-length, non-empty vectors")
    return math.sqrt(float(np.mean((truth - pred) ** 2)))


@dataclass(frozen=True)
class MetricReport:
    """Scores of one fold (or one site within a fold) on final predictions."""

    accuracy: float
    precision: float
    recall: float
    f1: float
    weighted_f1: float
    r2: Optional[float]
    rmse: float
    n: int
    counts: ConfusionCounts
    errors: np.ndarray = field(repr=False, compare=False, default_factory=lambda: np.empty(0))

    def as_metrics(self) -> Dict[str, Optional[float]]:
        return {
            "acc": self.accuracy,
            "prec": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "weighted_f1": self.weighted_f1,
            "r2": self.r2,
            "rmse": self.rmse,
        }


def score_predictions(truth_mm: Sequence[float], pred_mm: Sequence[float]) -> MetricReport:
    """
    Score final amplitude predictions: classes are recomputed as value > 0.

    A sample predicted as rain but regressed to 0 therefore counts as predicted dry.
    """
    truth = np.asarray(truth_mm, dtype=float)
    pred = np.asarray(pred_mm, dtype=float)
    scores = classification_metrics(truth > 0, pred > 0)
    if truth.size >= 2:
        r2, error = regression_metrics(truth, pred)
    else:
        r2, error = None, rmse(truth, pred)
    return MetricReport(
        accuracy=scores.accuracy,
        precision=scores.precision,
        recall=scores.recall,
        f1=scores.f1,
        weighted_f1=scores.weighted_f1,
        r2=r2,
        rmse=error,
        n=int(truth.size),
        counts=scores.counts,
        errors=truth - pred,
    )


@dataclass(frozen=True)
class MetricStat:
    mean: Optional[float]
    sd: Optional[float]
    per_fold: List[Optional[float]]
    n_missing: int = 0

    def to_dict(self) -> Dict[str, object]:
        return {"mean": self.mean, "sd": self.sd, "per_fold": list(self.per_fold), "n_missing": self.n_missing}


def summarize(values: Sequence[Optional[float]]) -> MetricStat:
    """Unweighted mean and population sd, skipping missing values."""
    present = np.array([v for v in values if v is not None], dtype=float)
    missing = len(values) - present.size
    if present.size == 0:
        return MetricStat(None, None, list(values), missing)
    return MetricStat(float(present.mean()), float(present.std(ddof=0)), list(values), missing)


def average_folds(reports: Sequence[MetricReport]) -> Dict[str, MetricStat]:
    """
    Mean and population sd per metric over fold reports.

    Folds with an undefined R^2 are excluded from its average and counted in n_missing.
    """
    if not reports:
        raise MetricError("average_folds needs at least one report")
    keys = reports[0].as_metrics().keys()
    return {key: summarize([r.as_metrics()[key] for r in reports]) for key in keys}
