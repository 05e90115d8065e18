"""ROC analysis, threshold selection, classification metrics, and the
validation-grid model selection rule."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DataError


@dataclass(frozen=True)
class RocCurve:
    thresholds: np.ndarray  # descending candidate thresholds (distinct scores)
    fpr: np.ndarray
    tpr: np.ndarray


def roc_curve(scores: np.ndarray, labels: np.ndarray) -> RocCurve:
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    n_pos = int((labels == 1).sum())
    n_neg = int((labels == 0).sum())
    if n_pos == 0 or n_neg == 0:
        raise DataError("ROC needs both classes")
    order = np.argsort(-scores, kind="stable")
    s = scores[order]
    y = labels[order]
    distinct = np.nonzero(np.diff(s))[0]
    cut = np.concatenate([distinct, [len(s) - 1]])
    tp = np.cumsum(y)[cut]
    fp = np.cumsum(1 - y)[cut]
    return RocCurve(thresholds=s[cut], fpr=fp / n_neg, tpr=tp / n_pos)


def roc_auc(scores: np.ndarray, labels: np.ndarray) -> tuple[RocCurve, float]:
    """Trapezoidal AUC; with midrank tie handling this equals the
    Mann-Whitney statistic U / (n+ * n-)."""
    curve = roc_curve(scores, labels)
    fpr = np.concatenate([[0.0], curve.fpr])
    tpr = np.concatenate([[0.0], curve.tpr])
    auc = float(np.trapz(tpr, fpr))
    return curve, auc


def optimal_threshold(curve: RocCurve) -> float:
    """Operating point closest to (fpr, tpr) = (0, 1); ties pick the lower
    threshold (favoring sensitivity)."""
    if curve.thresholds.size == 0:
        raise DataError("empty ROC curve")
    dist = np.sqrt(curve.fpr**2 + (1.0 - curve.tpr) ** 2)
    best = np.min(dist)
    candidates = np.nonzero(dist <= best + 1e-12)[0]
    return float(curve.thresholds[candidates].min())


def classification_metrics(scores: np.ndarray, labels: np.ndarray,
                           threshold: float) -> dict[str, float]:
    """AUC plus thresholded sensitivity / specificity / balanced accuracy
    (predict positive when score >= threshold)."""
    _, auc = roc_auc(scores, labels)
    labels = np.asarray(labels)
    pred = np.asarray(scores) >= threshold
    pos = labels == 1
    neg = labels == 0
    sensitivity = float(pred[pos].mean()) if pos.any() else 0.0
    specificity = float((~pred[neg]).mean()) if neg.any() else 0.0
    return {
        "auc": auc,
        "balanced_accuracy": 0.5 * (sensitivity + specificity),
        "sensitivity": sensitivity,
        "specificity": specificity,
    }


METRIC_NAMES = ("auc", "balanced_accuracy", "sensitivity", "specificity")


def model_selection(validation_results: dict[tuple, dict[str, float]]) -> tuple:
    """Winner = max unweighted mean of the four metrics; ties break on
    higher AUC, then smaller feature count k."""
    if not validation_results:
        raise DataError("empty validation grid")

    def sort_key(item):
        combo, metrics = item
        mean_metric = np.mean([metrics[m] for m in METRIC_NAMES])
        k = combo[2] if combo[2] is not None else np.inf
        return (-mean_metric, -metrics["auc"], k)

    ranked = sorted(validation_results.items(), key=sort_key)
    return ranked[0][0]
