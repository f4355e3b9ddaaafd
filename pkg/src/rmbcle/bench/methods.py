"""Benchmark method registry: names, hyperparameter grids and fitting.

Every method maps a parameter dict (block sizes) to a model exposing
``predict(task_id, X)``. The last block of each method is prefix
consistent, so a family of grid points differing only in that block is
fitted once at its largest size and truncated.
"""

from __future__ import annotations

from dataclasses import replace

import numpy as np

from .. import boosting, pipeline, similarity
from ..baselines import BaselineConfig, BaselineKind, BaselineModel, train_baseline
from ..boosting import BoostedModel, MtgbModel
from ..pipeline import LocalEnsemble, RmbCleConfig, RmbCleModel

METHODS = ("st", "dp", "taf", "mtgb", "rmb-cle", "rmb-cle-mtgb", "cluster-known", "cluster-known-mtgb")

# Block-size search space per method.
DEFAULT_GRIDS = {
    "st": {"rounds": [20, 30, 50, 100]},
    "dp": {"rounds": [20, 30, 50, 100]},
    "taf": {"rounds": [20, 30, 50, 100]},
    "mtgb": {"shared": [20, 30, 50], "specific": [0, 20, 30, 50, 100]},
    "rmb-cle": {"per_task_rounds": [20, 30, 50, 100], "local_rounds": [100]},
    "rmb-cle-mtgb": {"per_task_rounds": [100], "local_shared": [20, 30, 50], "local_specific": [0, 20, 30, 50, 100]},
    "cluster-known": {"local_rounds": [100]},
    "cluster-known-mtgb": {"local_shared": [20, 30, 50], "local_specific": [0, 20, 30, 50, 100]},
}

# The block whose size can be reduced by truncating a larger fit.
TRUNCATABLE = {
    "st": "rounds",
    "dp": "rounds",
    "taf": "rounds",
    "mtgb": "specific",
    "rmb-cle": "local_rounds",
    "rmb-cle-mtgb": "local_specific",
    "cluster-known": "local_rounds",
    "cluster-known-mtgb": "local_specific",
}

CLUSTERED = ("rmb-cle", "rmb-cle-mtgb")
NEEDS_PARTITION = ("cluster-known", "cluster-known-mtgb")


def check_method(method: str) -> str:
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; choose from {', '.join(METHODS)}")
    return method


def _rmbcle_config(method, params, learning_rate, base: RmbCleConfig | None) -> RmbCleConfig:
    base = base or RmbCleConfig()
    kind = LocalEnsemble.MTGB if method.endswith("-mtgb") else LocalEnsemble.POOLED
    keys = ("per_task_rounds", "local_rounds", "local_shared", "local_specific")
    return replace(base, local_kind=kind, learning_rate=learning_rate, **{k: int(params[k]) for k in keys if k in params})


def fit_method(
    method: str,
    collection,
    params: dict,
    learning_rate: float = boosting.DEFAULT_LEARNING_RATE,
    partition=None,
    rmbcle: RmbCleConfig | None = None,
    per_task_models=None,
):
    """Fit one method at one grid point."""
    check_method(method)
    if method in CLUSTERED:
        cfg = _rmbcle_config(method, params, learning_rate, rmbcle)
        return pipeline.train(collection, cfg, per_task_models=per_task_models)
    if method in NEEDS_PARTITION:
        if partition is None:
            raise ValueError(f"{method} needs the ground-truth partition")
        cfg = _rmbcle_config(method, params, learning_rate, rmbcle)
        bc = BaselineConfig(learning_rate=learning_rate, rmbcle=cfg, partition=tuple(int(c) for c in partition))
        return train_baseline(BaselineKind.CLUSTER_KNOWN, collection, bc)
    bc = BaselineConfig(
        rounds=int(params.get("rounds", 100)),
        shared=int(params.get("shared", 50)),
        specific=int(params.get("specific", 50)),
        learning_rate=learning_rate,
    )
    return train_baseline(method, collection, bc)


def _truncate_inner(model, n: int):
    if isinstance(model, (BoostedModel, MtgbModel)):
        return model.truncated(n)
    if isinstance(model, list):
        return [m.truncated(n) for m in model]
    if isinstance(model, RmbCleModel):
        cfg = model.config
        if cfg.local_kind is LocalEnsemble.MTGB:
            cfg = replace(cfg, local_specific=n)
        else:
            cfg = replace(cfg, local_rounds=n)
        return replace(model, cluster_models={c: m.truncated(n) for c, m in model.cluster_models.items()}, config=cfg)
    raise TypeError(f"cannot truncate {type(model).__name__}")


def truncate(model, method: str, n: int):
    """The model with its last block cut to ``n`` rounds."""
    if isinstance(model, BaselineModel):
        key = TRUNCATABLE[method]
        cfg = model.config
        if method in NEEDS_PARTITION:
            inner = _truncate_inner(model.inner, n)
            cfg = replace(cfg, rmbcle=inner.config)
        else:
            inner = _truncate_inner(model.inner, n)
            cfg = replace(cfg, **{key: n})
        return replace(model, inner=inner, config=cfg)
    return _truncate_inner(model, n)


def fit_family(
    method: str,
    collection,
    points,
    learning_rate: float = boosting.DEFAULT_LEARNING_RATE,
    partition=None,
    rmbcle: RmbCleConfig | None = None,
):
    """Models for every grid point, sharing fits through truncation.

    Returns a list aligned with ``points``.
    """
    key = TRUNCATABLE[method]
    groups: dict = {}
    for i, p in enumerate(points):
        rest = tuple(sorted((k, int(v)) for k, v in p.items() if k != key))
        groups.setdefault(rest, []).append(i)

    per_task = None
    cache: dict = {}
    if method in CLUSTERED and collection.n_tasks > 1:
        sizes = sorted({int(p["per_task_rounds"]) for p in points})
        per_task = pipeline.fit_per_task(collection, sizes[-1], learning_rate)
        # per-task round count -> cross-task errors, from one scoring pass
        cache["errors"] = dict(zip(sizes, similarity.staged_cross_task_errors(per_task, collection, sizes)))

    out = [None] * len(points)
    for rest, idx in groups.items():
        params = dict(rest)
        top = max(int(points[i][key]) for i in idx)
        params[key] = top
        if per_task is not None:
            full = _fit_clustered(method, collection, params, learning_rate, rmbcle, per_task, cache)
        else:
            full = fit_method(method, collection, params, learning_rate, partition, rmbcle)
        for i in idx:
            n = int(points[i][key])
            out[i] = full if n == top else truncate(full, method, n)
    return out


def _fit_clustered(method, collection, params, learning_rate, rmbcle, per_task, cache):
    """Same result as ``fit_method`` for a clustering method, reusing the
    cross-task errors and, when another grid point recovered the same
    partition, its local ensembles."""
    cfg = _rmbcle_config(method, params, learning_rate, rmbcle)
    ptm = [m.truncated(cfg.per_task_rounds) for m in per_task]
    errors = cache["errors"][cfg.per_task_rounds]
    geom, dendro, part = pipeline.discover_partition(collection, cfg, ptm, errors)
    local = tuple(sorted((k, v) for k, v in params.items() if k != "per_task_rounds"))
    ck = (tuple(part.assignment.tolist()), local)  # same partition, same local ensembles
    if ck not in cache:
        cache[ck] = pipeline.fit_local_ensembles(collection, part.assignment, cfg)
    models, groups = cache[ck]
    return RmbCleModel(
        assignment=part.assignment,
        cluster_models=dict(models),
        cluster_tasks=groups,
        config=cfg,
        geometry=geom,
        dendrogram=dendro,
        mean_silhouette=part.mean_silhouette,
        kind=collection.kind,
        meta={"cluster_known": False},
    )


def predict_tasks(model, collection) -> list:
    """Predictions for every task of ``collection`` (aligned with its rows)."""
    return [np.asarray(model.predict(t.task_id, t.features)) for t in collection]


def partition_of(model):
    """Recovered (or injected) task partition, if the model has one."""
    if isinstance(model, RmbCleModel):
        return model.assignment
    if isinstance(model, BaselineModel) and isinstance(model.inner, RmbCleModel):
        return model.inner.assignment
    return None
