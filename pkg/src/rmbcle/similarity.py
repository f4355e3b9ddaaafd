"""Cross-task error matrix, similarity profiles and cosine-distance geometry."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .boosting import make_loss
from .data import MultiTaskCollection, ProblemKind

DEFAULT_EPSILON = 1e-8
SIGNATURE_LENGTH = 32


class SimilaritySource(str, enum.Enum):
    CROSS_TASK_ERROR = "cross-task-error"
    PSEUDO_RESIDUAL = "pseudo-residual"


@dataclass(frozen=True)
class SimilarityGeometry:
    errors: np.ndarray
    similarities: np.ndarray
    distances: np.ndarray
    epsilon: float = DEFAULT_EPSILON
    source: SimilaritySource = SimilaritySource.CROSS_TASK_ERROR

    @property
    def n_tasks(self) -> int:
        return self.errors.shape[0]


def cross_task_errors(models, collection: MultiTaskCollection) -> np.ndarray:
    """E[i, j]: error of model j on task i's data.

    Mean squared error for regression, 1 - accuracy (argmax predictions)
    for classification.
    """
    _check_models(models, collection)
    m = collection.n_tasks
    X, y, tid = collection.pooled()
    counts = np.bincount(tid, minlength=m)
    E = np.empty((m, m))
    clf = collection.kind is ProblemKind.CLASSIFICATION
    for j, model in enumerate(models):
        pred = model.predict(X)
        per_row = (pred != y).astype(float) if clf else (y - pred) ** 2
        E[:, j] = np.bincount(tid, weights=per_row, minlength=m) / counts
    return E


def staged_cross_task_errors(models, collection: MultiTaskCollection, rounds) -> list:
    """``cross_task_errors`` of the boosted models truncated to each entry of
    ``rounds``, from one scoring pass per model."""
    _check_models(models, collection)
    m = collection.n_tasks
    X, y, tid = collection.pooled()
    counts = np.bincount(tid, minlength=m)
    out = [np.empty((m, m)) for _ in rounds]
    clf = collection.kind is ProblemKind.CLASSIFICATION
    for j, model in enumerate(models):
        for E, F in zip(out, model.staged_raw_scores(X, rounds)):
            per_row = (np.argmax(F, axis=1) != y).astype(float) if clf else (y - F[:, 0]) ** 2
            E[:, j] = np.bincount(tid, weights=per_row, minlength=m) / counts
    return out


def _check_models(models, collection):
    if len(models) != collection.n_tasks:
        raise ValueError(f"{len(models)} models for {collection.n_tasks} tasks")
    for j, model in enumerate(models):
        if model.n_features != collection.n_features:
            raise ValueError(f"model {j} expects {model.n_features} features, data has {collection.n_features}")


def to_similarity(E, epsilon: float = DEFAULT_EPSILON) -> np.ndarray:
    E = np.asarray(E, dtype=float)
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    if not np.all(np.isfinite(E)):
        raise ValueError("error matrix contains non-finite entries")
    if np.any(E < 0):
        raise ValueError("error matrix must be non-negative")
    return 1.0 / (E + epsilon)


def cosine_distances(S) -> np.ndarray:
    """1 - cosine between full row profiles, zero diagonal, symmetrized, clipped to [0, 1]."""
    S = np.asarray(S, dtype=float)
    norms = np.linalg.norm(S, axis=1)
    if np.any(norms == 0):
        raise ValueError(f"zero-norm similarity profile for task(s) {np.flatnonzero(norms == 0).tolist()}")
    U = S / norms[:, None]
    D = 1.0 - U @ U.T
    np.fill_diagonal(D, 0.0)
    D = 0.5 * (D + D.T)
    return np.clip(D, 0.0, 1.0)


def residual_signature(residuals, length: int = SIGNATURE_LENGTH) -> np.ndarray:
    """Fixed-length sorted-quantile summary of a residual vector (per column)."""
    R = np.asarray(residuals, dtype=float)
    if R.ndim == 1:
        R = R[:, None]
    qs = np.linspace(0.0, 1.0, length)
    return np.quantile(R, qs, axis=0).T.ravel()


def pseudo_residual_profiles(models, collection: MultiTaskCollection, epsilon: float = DEFAULT_EPSILON) -> np.ndarray:
    """Similarity matrix from each task's final-iteration negative gradients.

    Residual vectors are summarized by quantile signatures so tasks of
    different sizes compare; S[i, j] = 1 / (msd(sig_i, sig_j) + eps).
    """
    if len(models) != collection.n_tasks:
        raise ValueError(f"{len(models)} models for {collection.n_tasks} tasks")
    loss = make_loss(collection.kind, collection.n_classes)
    sigs = []
    for model, task in zip(models, collection):
        G = loss.negative_gradient(task.targets, model.raw_scores(task.features))
        sigs.append(residual_signature(G))
    sigs = np.array(sigs)
    diff = sigs[:, None, :] - sigs[None, :, :]
    return to_similarity(np.mean(diff**2, axis=2), epsilon)


def build_geometry(
    models,
    collection: MultiTaskCollection,
    epsilon: float = DEFAULT_EPSILON,
    source: SimilaritySource = SimilaritySource.CROSS_TASK_ERROR,
    errors=None,
) -> SimilarityGeometry:
    """E, S and cosine distances; ``errors`` reuses a precomputed E."""
    source = SimilaritySource(source)
    E = cross_task_errors(models, collection) if errors is None else np.asarray(errors, dtype=float)
    if source is SimilaritySource.CROSS_TASK_ERROR:
        S = to_similarity(E, epsilon)
    else:
        S = pseudo_residual_profiles(models, collection, epsilon)
    return SimilarityGeometry(E, S, cosine_distances(S), epsilon, source)
