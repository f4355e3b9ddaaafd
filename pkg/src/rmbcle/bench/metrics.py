"""Task-level evaluation metrics."""

from __future__ import annotations

import numpy as np

from ..data import ProblemKind

CLASSIFICATION_METRICS = ("accuracy", "macro_recall", "macro_f1")
REGRESSION_METRICS = ("rmse", "mae")
HIGHER_IS_BETTER = {"accuracy": True, "macro_recall": True, "macro_f1": True, "rmse": False, "mae": False}


def metric_names(kind) -> tuple:
    return CLASSIFICATION_METRICS if ProblemKind(kind) is ProblemKind.CLASSIFICATION else REGRESSION_METRICS


def _aligned(predictions, targets):
    p = np.asarray(predictions)
    t = np.asarray(targets)
    if p.shape != t.shape or p.ndim != 1:
        raise ValueError(f"predictions {p.shape} and targets {t.shape} must be aligned vectors")
    if p.size == 0:
        raise ValueError("metrics need at least one prediction")
    return p, t


def regression_metrics(predictions, targets) -> dict:
    p, t = _aligned(predictions, targets)
    err = p.astype(float) - t.astype(float)
    return {"rmse": float(np.sqrt(np.mean(err**2))), "mae": float(np.mean(np.abs(err)))}


def classification_metrics(predictions, targets, n_classes: int | None = None) -> dict:
    """Accuracy plus macro recall and macro F1 over classes 0..Q-1.

    A class with no target rows still counts in the macro averages with a
    zero term; such classes are listed under ``absent_classes``.
    """
    p, t = _aligned(predictions, targets)
    p = p.astype(np.int64)
    t = t.astype(np.int64)
    q = int(max(p.max(), t.max()) + 1 if n_classes is None else n_classes)
    cm = np.zeros((q, q), dtype=np.int64)
    np.add.at(cm, (t, p), 1)
    tp = np.diag(cm).astype(float)
    support = cm.sum(axis=1).astype(float)
    predicted = cm.sum(axis=0).astype(float)
    with np.errstate(divide="ignore", invalid="ignore"):
        recall = np.where(support > 0, tp / support, 0.0)
        precision = np.where(predicted > 0, tp / predicted, 0.0)
        f1 = np.where(precision + recall > 0, 2 * precision * recall / (precision + recall), 0.0)
    return {
        "accuracy": float(tp.sum() / len(t)),
        "macro_recall": float(recall.mean()),
        "macro_f1": float(f1.mean()),
        "absent_classes": np.flatnonzero(support == 0).tolist(),
    }


def metrics(predictions, targets, kind, n_classes: int | None = None) -> dict:
    if ProblemKind(kind) is ProblemKind.CLASSIFICATION:
        return classification_metrics(predictions, targets, n_classes)
    return regression_metrics(predictions, targets)
