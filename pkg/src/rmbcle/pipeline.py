"""Per-task boosting -> similarity geometry -> task clustering -> cluster-local ensembles."""

from __future__ import annotations

import csv
import enum
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import boosting
from .boosting import MtgbModel
from .clustering import DEFAULT_K_MAX, Dendrogram, canonical_labels, cluster_tasks
from .data import MultiTaskCollection, ProblemKind
from .similarity import DEFAULT_EPSILON, SimilarityGeometry, SimilaritySource, build_geometry


class LocalEnsemble(str, enum.Enum):
    POOLED = "pooled"  # one booster on [x; one-hot(task within cluster)]
    MTGB = "mtgb"  # shared + task-specific blocks over the cluster's tasks


class RoutingError(KeyError):
    """Prediction requested for a task id that was not seen in training."""


@dataclass(frozen=True)
class RmbCleConfig:
    per_task_rounds: int = 100
    local_kind: LocalEnsemble = LocalEnsemble.POOLED
    local_rounds: int = 100
    local_shared: int = 50
    local_specific: int = 50
    learning_rate: float = boosting.DEFAULT_LEARNING_RATE
    epsilon: float = DEFAULT_EPSILON
    k_max: int = DEFAULT_K_MAX
    similarity_source: SimilaritySource = SimilaritySource.CROSS_TASK_ERROR
    linkage: str = "average"

    def __post_init__(self):
        object.__setattr__(self, "local_kind", LocalEnsemble(self.local_kind))
        object.__setattr__(self, "similarity_source", SimilaritySource(self.similarity_source))
        if min(self.per_task_rounds, self.local_shared, self.local_specific) < 0:
            raise ValueError("block sizes must be non-negative")
        if self.local_rounds < 1:
            raise ValueError("local_rounds must be >= 1")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["local_kind"] = self.local_kind.value
        d["similarity_source"] = self.similarity_source.value
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RmbCleConfig":
        return cls(**d)


def one_hot_augment(X, position: int, width: int) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    H = np.zeros((X.shape[0], width))
    H[:, position] = 1.0
    return np.hstack([X, H])


@dataclass
class RmbCleModel:
    assignment: np.ndarray
    cluster_models: dict
    cluster_tasks: dict  # cluster -> ascending task ids (one-hot layout)
    config: RmbCleConfig
    geometry: SimilarityGeometry | None = None
    dendrogram: Dendrogram | None = None
    mean_silhouette: float = float("nan")
    kind: ProblemKind = ProblemKind.REGRESSION
    meta: dict = field(default_factory=dict)

    @property
    def n_clusters(self) -> int:
        return len(self.cluster_models)

    @property
    def task_ids(self):
        return list(range(len(self.assignment)))

    def route(self, task_id: int) -> int:
        if not 0 <= task_id < len(self.assignment) or int(task_id) != task_id:
            raise RoutingError(f"task {task_id} was not present at training time")
        return int(self.assignment[task_id])

    def raw_scores(self, task_id: int, X) -> np.ndarray:
        c = self.route(task_id)
        model = self.cluster_models[c]
        if isinstance(model, MtgbModel):
            return model.raw_scores(task_id, X)
        members = self.cluster_tasks[c]
        return model.raw_scores(one_hot_augment(X, members.index(task_id), len(members)))

    def predict(self, task_id: int, X) -> np.ndarray:
        F = self.raw_scores(task_id, X)
        if self.kind is ProblemKind.REGRESSION:
            return F[:, 0]
        return np.argmax(F, axis=1)

    def predict_proba(self, task_id: int, X) -> np.ndarray:
        return boosting.softmax(self.raw_scores(task_id, X))

    def stumps_per_prediction(self, task_id: int) -> int:
        model = self.cluster_models[self.route(task_id)]
        if isinstance(model, MtgbModel):
            return model.shared.n_stumps + model.specific[task_id].n_stumps
        return model.n_stumps


def fit_per_task(collection: MultiTaskCollection, n_rounds: int, learning_rate: float):
    return [
        boosting.fit(t.features, t.targets, n_rounds, learning_rate, t.kind, collection.n_classes)
        for t in collection
    ]


def fit_local_ensemble(collection: MultiTaskCollection, members, config: RmbCleConfig):
    members = sorted(members)
    if config.local_kind is LocalEnsemble.MTGB:
        return boosting.fit_mtgb(collection, config.local_shared, config.local_specific, config.learning_rate, task_ids=members)
    X = np.vstack([one_hot_augment(collection[i].features, p, len(members)) for p, i in enumerate(members)])
    y = np.concatenate([collection[i].targets for i in members])
    return boosting.fit(X, y, config.local_rounds, config.learning_rate, collection.kind, collection.n_classes)


def discover_partition(collection: MultiTaskCollection, config: RmbCleConfig, per_task_models=None, errors=None):
    """Steps 1-4: returns (geometry, dendrogram, partition)."""
    if per_task_models is None:
        per_task_models = fit_per_task(collection, config.per_task_rounds, config.learning_rate)
    geom = build_geometry(per_task_models, collection, config.epsilon, config.similarity_source, errors)
    dendro, part = cluster_tasks(geom.distances, config.k_max, config.linkage)
    return geom, dendro, part


def fit_local_ensembles(collection, assignment, config: RmbCleConfig):
    assignment = np.asarray(assignment)
    groups = {int(c): np.flatnonzero(assignment == c).tolist() for c in np.unique(assignment)}
    models = {c: fit_local_ensemble(collection, g, config) for c, g in groups.items()}
    return models, groups


def train(
    collection: MultiTaskCollection,
    config: RmbCleConfig = RmbCleConfig(),
    partition=None,
    per_task_models=None,
) -> RmbCleModel:
    """Fit the full pipeline.

    ``partition`` (a task -> cluster vector) skips similarity estimation and
    clustering (cluster-known mode). A single-task collection becomes one
    singleton cluster.
    """
    m = collection.n_tasks
    geom = dendro = None
    score = float("nan")
    if partition is not None:
        partition = np.asarray(partition)
        if partition.shape != (m,):
            raise ValueError(f"partition has {partition.size} entries for {m} tasks")
        groups = [np.flatnonzero(partition == c).tolist() for c in np.unique(partition)]
        assignment = canonical_labels(groups, m)
    elif m == 1:
        assignment = np.zeros(1, dtype=np.int64)
    else:
        geom, dendro, part = discover_partition(collection, config, per_task_models)
        assignment, score = part.assignment, part.mean_silhouette

    models, groups = fit_local_ensembles(collection, assignment, config)
    return RmbCleModel(
        assignment=assignment,
        cluster_models=models,
        cluster_tasks=groups,
        config=config,
        geometry=geom,
        dendrogram=dendro,
        mean_silhouette=score,
        kind=collection.kind,
        meta={"cluster_known": partition is not None},
    )


def train_cluster_known(collection, partition, config: RmbCleConfig = RmbCleConfig()) -> RmbCleModel:
    return train(collection, config, partition=partition)


def predict(model: RmbCleModel, task_id: int, X) -> np.ndarray:
    return model.predict(task_id, X)


# -- persistence -------------------------------------------------------------


def _write_matrix(path: Path, A) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["task_id", *range(A.shape[1])])
        for i, row in enumerate(A):
            w.writerow([i, *map(repr, row.tolist())])


def _read_matrix(path: Path) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))[1:]
    return np.array([[float(v) for v in r[1:]] for r in rows])


def write_partition(path, assignment) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["task_id", "cluster"])
        for i, c in enumerate(assignment):
            w.writerow([i, int(c)])


def read_partition(path) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    out = np.empty(len(rows), dtype=np.int64)
    for r in rows:
        out[int(r["task_id"])] = int(r["cluster"])
    return out


def write_geometry(directory, geom: SimilarityGeometry) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    _write_matrix(directory / "E.csv", geom.errors)
    _write_matrix(directory / "S.csv", geom.similarities)
    _write_matrix(directory / "Delta.csv", geom.distances)


def save_model(model: RmbCleModel, directory) -> Path:
    """Directory layout: partition.csv, geometry/*.csv, clusters/<c>/model.json, config.json."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    write_partition(directory / "partition.csv", model.assignment)
    if model.geometry is not None:
        write_geometry(directory / "geometry", model.geometry)
    if model.dendrogram is not None:
        (directory / "dendrogram.json").write_text(json.dumps(model.dendrogram.to_dict()))
    for c, cm in model.cluster_models.items():
        cdir = directory / "clusters" / str(c)
        cdir.mkdir(parents=True, exist_ok=True)
        payload = cm.to_dict()
        payload["tasks"] = model.cluster_tasks[c]
        (cdir / "model.json").write_text(json.dumps(payload))
    cfg = {
        "method": "rmb-cle",
        "problem_kind": model.kind.value,
        "config": model.config.to_dict(),
        "mean_silhouette": None if np.isnan(model.mean_silhouette) else model.mean_silhouette,
        "epsilon": model.config.epsilon,
        **model.meta,
    }
    if model.geometry is not None:
        cfg["similarity_source"] = model.geometry.source.value
    (directory / "config.json").write_text(json.dumps(cfg, indent=2))
    return directory


def load_model(directory) -> RmbCleModel:
    directory = Path(directory)
    cfg = json.loads((directory / "config.json").read_text())
    config = RmbCleConfig.from_dict(cfg["config"])
    assignment = read_partition(directory / "partition.csv")
    models, groups = {}, {}
    for c in sorted(int(p.name) for p in (directory / "clusters").iterdir()):
        payload = json.loads((directory / "clusters" / str(c) / "model.json").read_text())
        groups[c] = [int(t) for t in payload.pop("tasks")]
        models[c] = boosting.model_from_dict(payload)
    geom = None
    gdir = directory / "geometry"
    if gdir.exists():
        geom = SimilarityGeometry(
            _read_matrix(gdir / "E.csv"),
            _read_matrix(gdir / "S.csv"),
            _read_matrix(gdir / "Delta.csv"),
            config.epsilon,
            SimilaritySource(cfg.get("similarity_source", config.similarity_source.value)),
        )
    dendro = None
    if (directory / "dendrogram.json").exists():
        dendro = Dendrogram.from_dict(json.loads((directory / "dendrogram.json").read_text()))
    score = cfg.get("mean_silhouette")
    return RmbCleModel(
        assignment, models, groups, config, geom, dendro,
        float("nan") if score is None else score,
        ProblemKind(cfg["problem_kind"]),
        {"cluster_known": cfg.get("cluster_known", False)},
    )
