"""Within-training K-fold grid search over boosting block sizes."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .. import boosting
from ..data import DataError, MultiTaskCollection, ProblemKind
from . import methods

DEFAULT_FOLDS = 5


@dataclass
class SearchResult:
    best: dict
    points: list
    scores: list  # mean CV objective per point (nan when CV was skipped)
    n_folds: int
    fold_scores: list = field(default_factory=list)  # per point: (folds, tasks)


def expand_grid(grid: dict) -> list:
    """Cartesian product of a {name: values} grid, in key then value order."""
    if not grid or any(len(v) == 0 for v in grid.values()):
        raise ValueError("grid must be non-empty")
    keys = list(grid)
    return [dict(zip(keys, vals)) for vals in itertools.product(*(grid[k] for k in keys))]


def block_total(point: dict) -> int:
    return int(sum(int(v) for v in point.values()))


def fold_indices(n: int, n_folds: int, rng) -> list:
    """Shuffled rows cut into ``n_folds`` near-equal validation folds."""
    perm = rng.permutation(n)
    return [np.sort(f) for f in np.array_split(perm, n_folds)]


def make_folds(collection: MultiTaskCollection, n_folds: int, seed: int):
    """Per-task folds recombined into (train, validation) collection pairs.

    Each task is shuffled with its own stream so folds do not depend on the
    other tasks.
    """
    per_task = [
        fold_indices(t.n_samples, n_folds, np.random.default_rng([seed, t.task_id])) for t in collection
    ]
    pairs = []
    for f in range(n_folds):
        tr, va = [], []
        for t, folds in zip(collection, per_task):
            val = folds[f]
            keep = np.setdiff1d(np.arange(t.n_samples), val)
            tr.append(t.subset(keep))
            va.append(t.subset(val))
        pairs.append((collection.with_tasks(tr), collection.with_tasks(va)))
    return pairs


def objective(model, valid: MultiTaskCollection) -> np.ndarray:
    """Per-task score, higher is better: accuracy or negative RMSE."""
    preds = methods.predict_tasks(model, valid)
    if valid.kind is ProblemKind.CLASSIFICATION:
        return np.array([np.mean(p == t.targets) for p, t in zip(preds, valid)])
    return np.array([-np.sqrt(np.mean((p - t.targets) ** 2)) for p, t in zip(preds, valid)])


def grid_search(
    method: str,
    train: MultiTaskCollection,
    grid: dict | None = None,
    folds: int = DEFAULT_FOLDS,
    seed: int = 0,
    learning_rate: float = boosting.DEFAULT_LEARNING_RATE,
    partition=None,
    rmbcle=None,
) -> SearchResult:
    """Pick the grid point with the best CV objective.

    Scores are averaged over folds, then tasks. Ties go to the smallest
    total block size, then to grid order. Folds shrink to the smallest task
    size when a task has fewer than ``folds`` rows.
    """
    methods.check_method(method)
    points = expand_grid(methods.DEFAULT_GRIDS[method] if grid is None else grid)
    if len(points) == 1:
        return SearchResult(dict(points[0]), points, [float("nan")], 0)
    n_folds = min(folds, min(t.n_samples for t in train))
    if n_folds < 2:
        raise DataError("cross-validation needs at least two rows in every task")

    per_point = [[] for _ in points]
    for tr, va in make_folds(train, n_folds, seed):
        fitted = methods.fit_family(method, tr, points, learning_rate, partition, rmbcle)
        for i, model in enumerate(fitted):
            per_point[i].append(objective(model, va))
    fold_scores = [np.array(s) for s in per_point]
    scores = [float(s.mean(axis=0).mean()) for s in fold_scores]

    order = sorted(range(len(points)), key=lambda i: (-scores[i], block_total(points[i]), i))
    return SearchResult(dict(points[order[0]]), points, scores, n_folds, fold_scores)
