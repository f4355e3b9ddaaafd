"""Cluster-stability frequencies and average-rank tables."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.stats import rankdata

from ..clustering import relabel


@dataclass(frozen=True)
class StabilityReport:
    frequencies: np.ndarray  # (m, K): share of runs placing task i in matched cluster c
    exact_recovery: float | None
    n_runs: int
    reference: np.ndarray  # labels the columns are matched to


def _overlap(a: np.ndarray, b: np.ndarray, ka: int, kb: int) -> np.ndarray:
    M = np.zeros((ka, kb), dtype=np.int64)
    np.add.at(M, (a, b), 1)
    return M


def match_labels(assignment, reference) -> np.ndarray:
    """Relabel ``assignment`` onto ``reference`` labels by maximum overlap.

    Clusters left without a reference partner get fresh labels after the
    reference's, ordered by smallest member.
    """
    a = relabel(assignment)
    r = relabel(reference)
    ka, kr = a.max() + 1, r.max() + 1
    width = max(ka, kr)
    M = _overlap(a, r, ka, width)
    rows, cols = linear_sum_assignment(-M)
    mapping = np.empty(ka, dtype=np.int64)
    mapping[rows] = cols
    # matched columns beyond the reference are placeholders: renumber them
    extra = sorted((c for c in range(ka) if mapping[c] >= kr), key=lambda c: np.flatnonzero(a == c)[0])
    for n, c in enumerate(extra):
        mapping[c] = kr + n
    return mapping[a]


def stability_report(runs, ground_truth=None) -> StabilityReport:
    """Per-task assignment frequencies over runs.

    Labels are matched to the ground truth (or, without one, to the first
    run) by a maximum-overlap assignment before counting.
    """
    runs = [np.asarray(r) for r in runs]
    if not runs:
        raise ValueError("stability report needs at least one run")
    m = runs[0].shape[0]
    if any(r.shape != (m,) for r in runs):
        raise ValueError("runs disagree on the number of tasks")
    if ground_truth is not None and np.asarray(ground_truth).shape != (m,):
        raise ValueError("ground truth does not match the runs' task count")
    reference = relabel(ground_truth if ground_truth is not None else runs[0])
    matched = [match_labels(r, reference) for r in runs]
    width = max(int(reference.max()) + 1, max(int(x.max()) + 1 for x in matched))
    F = np.zeros((m, width))
    for x in matched:
        F[np.arange(m), x] += 1
    F /= len(runs)
    exact = None
    if ground_truth is not None:
        exact = float(np.mean([np.array_equal(relabel(r), reference) for r in runs]))
    return StabilityReport(F, exact, len(runs), reference)


def rank_table(table: dict, higher_is_better: bool = True) -> dict:
    """Mean rank per method across tasks (1 = best, ties share the average rank).

    ``table`` maps method -> per-task metric vector; every method must
    cover the same tasks.
    """
    if not table:
        raise ValueError("rank table needs at least one method")
    names = list(table)
    M = np.array([np.asarray(table[n], dtype=float) for n in names])
    if M.ndim != 2 or any(len(np.atleast_1d(table[n])) != M.shape[1] for n in names):
        raise ValueError("every method must have a value for every task")
    if np.isnan(M).any():
        raise ValueError("missing cells in the metric table")
    scores = -M if higher_is_better else M
    ranks = np.apply_along_axis(rankdata, 0, scores)  # rank methods within each task column
    return {n: float(r) for n, r in zip(names, ranks.mean(axis=1))}
