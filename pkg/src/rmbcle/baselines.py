"""Comparison methods: single-task, pooling, task-as-feature, MTGB, cluster-known."""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import boosting, pipeline
from .boosting import BoostedModel
from .data import MultiTaskCollection, ProblemKind
from .pipeline import RmbCleConfig, RoutingError, one_hot_augment


class BaselineKind(str, enum.Enum):
    ST = "st"
    DP = "dp"
    TAF = "taf"
    MTGB = "mtgb"
    CLUSTER_KNOWN = "cluster-known"


@dataclass(frozen=True)
class BaselineConfig:
    """Block sizes: ``rounds`` for ST/DP/TaF, ``shared``/``specific`` for MTGB.

    ClusterKnown uses ``rmbcle`` plus the injected ``partition``.
    """

    rounds: int = 100
    shared: int = 50
    specific: int = 50
    learning_rate: float = boosting.DEFAULT_LEARNING_RATE
    rmbcle: RmbCleConfig = RmbCleConfig()
    partition: tuple | None = None

    def to_dict(self) -> dict:
        return {
            "rounds": self.rounds,
            "shared": self.shared,
            "specific": self.specific,
            "learning_rate": self.learning_rate,
            "rmbcle": self.rmbcle.to_dict(),
            "partition": None if self.partition is None else [int(c) for c in self.partition],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BaselineConfig":
        d = dict(d)
        d["rmbcle"] = RmbCleConfig.from_dict(d["rmbcle"])
        if d.get("partition") is not None:
            d["partition"] = tuple(d["partition"])
        return cls(**d)


@dataclass
class BaselineModel:
    kind: BaselineKind
    inner: object
    config: BaselineConfig
    n_tasks: int
    problem_kind: ProblemKind = ProblemKind.REGRESSION
    meta: dict = field(default_factory=dict)

    def _check_task(self, task_id):
        if not 0 <= task_id < self.n_tasks or int(task_id) != task_id:
            raise RoutingError(f"task {task_id} was not present at training time")

    def raw_scores(self, task_id: int, X) -> np.ndarray:
        k = self.kind
        if k is BaselineKind.DP:
            return self.inner.raw_scores(X)
        self._check_task(task_id)
        if k is BaselineKind.ST:
            return self.inner[task_id].raw_scores(X)
        if k is BaselineKind.TAF:
            return self.inner.raw_scores(one_hot_augment(X, task_id, self.n_tasks))
        return self.inner.raw_scores(task_id, X)

    def predict(self, task_id: int, X) -> np.ndarray:
        F = self.raw_scores(task_id, X)
        if self.problem_kind is ProblemKind.REGRESSION:
            return F[:, 0]
        return np.argmax(F, axis=1)


def taf_design(collection: MultiTaskCollection):
    m = collection.n_tasks
    X = np.vstack([one_hot_augment(t.features, t.task_id, m) for t in collection])
    y = np.concatenate([t.targets for t in collection])
    return X, y


def train_baseline(kind, collection: MultiTaskCollection, config: BaselineConfig = BaselineConfig()) -> BaselineModel:
    kind = BaselineKind(kind)
    lr = config.learning_rate
    q = collection.n_classes
    pk = collection.kind
    if kind is BaselineKind.ST:
        inner = [boosting.fit(t.features, t.targets, config.rounds, lr, pk, q) for t in collection]
    elif kind is BaselineKind.DP:
        X, y, _ = collection.pooled()
        inner = boosting.fit(X, y, config.rounds, lr, pk, q)
    elif kind is BaselineKind.TAF:
        X, y = taf_design(collection)
        inner = boosting.fit(X, y, config.rounds, lr, pk, q)
    elif kind is BaselineKind.MTGB:
        inner = boosting.fit_mtgb(collection, config.shared, config.specific, lr)
    else:
        if config.partition is None:
            raise ValueError("cluster-known baseline needs an injected partition")
        inner = pipeline.train(collection, config.rmbcle, partition=np.asarray(config.partition))
    return BaselineModel(kind, inner, config, collection.n_tasks, pk)


def predict_baseline(model: BaselineModel, task_id: int, X) -> np.ndarray:
    return model.predict(task_id, X)


def save_baseline(model: BaselineModel, directory) -> Path:
    """Writes ``<directory>/baselines/<kind>/``."""
    out = Path(directory) / "baselines" / model.kind.value
    out.mkdir(parents=True, exist_ok=True)
    cfg = {
        "method": model.kind.value,
        "problem_kind": model.problem_kind.value,
        "n_tasks": model.n_tasks,
        "config": model.config.to_dict(),
    }
    (out / "config.json").write_text(json.dumps(cfg, indent=2))
    if model.kind is BaselineKind.CLUSTER_KNOWN:
        pipeline.save_model(model.inner, out / "rmbcle")
    elif model.kind is BaselineKind.ST:
        for t, m in enumerate(model.inner):
            d = out / "tasks" / str(t)
            d.mkdir(parents=True, exist_ok=True)
            (d / "model.json").write_text(json.dumps(m.to_dict()))
    else:
        (out / "model.json").write_text(json.dumps(model.inner.to_dict()))
    return out


def load_baseline(directory) -> BaselineModel:
    directory = Path(directory)
    cfg = json.loads((directory / "config.json").read_text())
    kind = BaselineKind(cfg["method"])
    config = BaselineConfig.from_dict(cfg["config"])
    n = int(cfg["n_tasks"])
    if kind is BaselineKind.CLUSTER_KNOWN:
        inner = pipeline.load_model(directory / "rmbcle")
    elif kind is BaselineKind.ST:
        inner = [BoostedModel.from_dict(json.loads((directory / "tasks" / str(t) / "model.json").read_text())) for t in range(n)]
    else:
        inner = boosting.model_from_dict(json.loads((directory / "model.json").read_text()))
    return BaselineModel(kind, inner, config, n, ProblemKind(cfg["problem_kind"]))
