"""Task-indexed tabular datasets, splitting and CSV persistence."""

from __future__ import annotations

import csv
import enum
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np


class ProblemKind(str, enum.Enum):
    REGRESSION = "regression"
    CLASSIFICATION = "classification"


class DataError(ValueError):
    """Raised for malformed datasets and unparseable CSV input."""


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class TaskDataset:
    task_id: int
    features: np.ndarray
    targets: np.ndarray
    kind: ProblemKind

    def __post_init__(self):
        X = np.asarray(self.features, dtype=float)
        if X.ndim != 2:
            raise DataError(f"task {self.task_id}: features must be 2-d, got shape {X.shape}")
        y = np.asarray(self.targets)
        y = y.astype(np.int64) if self.kind is ProblemKind.CLASSIFICATION else y.astype(float)
        if y.ndim != 1 or y.shape[0] != X.shape[0]:
            raise DataError(f"task {self.task_id}: {X.shape[0]} feature rows but {y.shape[0]} targets")
        if X.shape[0] < 1:
            raise DataError(f"task {self.task_id} has no samples")
        if not np.all(np.isfinite(X)):
            raise DataError(f"task {self.task_id}: non-finite feature values")
        if self.kind is ProblemKind.CLASSIFICATION and y.min() < 0:
            raise DataError(f"task {self.task_id}: negative class label")
        if self.kind is ProblemKind.REGRESSION and not np.all(np.isfinite(y)):
            raise DataError(f"task {self.task_id}: non-finite targets")
        object.__setattr__(self, "features", _frozen(X))
        object.__setattr__(self, "targets", _frozen(y))

    @property
    def n_samples(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    def subset(self, rows) -> "TaskDataset":
        return TaskDataset(self.task_id, self.features[rows], self.targets[rows], self.kind)


@dataclass(frozen=True)
class MultiTaskCollection:
    """Ordered tasks sharing dimension and problem kind; ids are 0..m-1.

    ``n_classes`` is fixed at construction (1 + max label over all tasks
    unless given) so that subsets keep the global label space.
    ``split_boundary`` optionally records, per task, how many leading
    rows form the training part.
    """

    tasks: tuple
    n_classes: int = 0
    split_boundary: tuple | None = None
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        tasks = tuple(self.tasks)
        if not tasks:
            raise DataError("collection needs at least one task")
        object.__setattr__(self, "tasks", tasks)
        ids = [t.task_id for t in tasks]
        if ids != list(range(len(tasks))):
            raise DataError(f"task ids must be contiguous 0..{len(tasks) - 1}, got {ids}")
        dims = {t.n_features for t in tasks}
        kinds = {t.kind for t in tasks}
        if len(dims) != 1:
            raise DataError(f"tasks disagree on feature dimension: {sorted(dims)}")
        if len(kinds) != 1:
            raise DataError("tasks disagree on problem kind")
        if self.kind is ProblemKind.CLASSIFICATION:
            q = 1 + max(int(t.targets.max()) for t in tasks)
            if self.n_classes == 0:
                object.__setattr__(self, "n_classes", q)
            elif q > self.n_classes:
                raise DataError(f"label {q - 1} outside declared {self.n_classes} classes")
            if self.n_classes < 2:
                raise DataError("classification needs at least two classes")
        else:
            object.__setattr__(self, "n_classes", 0)
        if self.split_boundary is not None:
            b = tuple(int(v) for v in self.split_boundary)
            if len(b) != len(tasks) or any(not 0 <= v <= t.n_samples for v, t in zip(b, tasks)):
                raise DataError("split boundary does not match the tasks")
            object.__setattr__(self, "split_boundary", b)

    @classmethod
    def from_arrays(cls, Xs: Sequence, ys: Sequence, kind, n_classes: int = 0, **kw):
        kind = ProblemKind(kind)
        tasks = [TaskDataset(i, X, y, kind) for i, (X, y) in enumerate(zip(Xs, ys))]
        return cls(tuple(tasks), n_classes=n_classes, **kw)

    @property
    def kind(self) -> ProblemKind:
        return self.tasks[0].kind

    @property
    def n_tasks(self) -> int:
        return len(self.tasks)

    @property
    def n_features(self) -> int:
        return self.tasks[0].n_features

    def __len__(self):
        return len(self.tasks)

    def __getitem__(self, i) -> TaskDataset:
        return self.tasks[i]

    def __iter__(self):
        return iter(self.tasks)

    def with_tasks(self, tasks) -> "MultiTaskCollection":
        return MultiTaskCollection(tuple(tasks), n_classes=self.n_classes, meta=dict(self.meta))

    def pooled(self, task_ids=None):
        """Row-concatenation of the given tasks (ascending id order).

        Returns ``(X, y, task_index)``.
        """
        ids = range(self.n_tasks) if task_ids is None else sorted(task_ids)
        parts = [self.tasks[i] for i in ids]
        X = np.concatenate([t.features for t in parts])
        y = np.concatenate([t.targets for t in parts])
        tid = np.concatenate([np.full(t.n_samples, t.task_id) for t in parts])
        return X, y, tid


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.8
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise DataError("train_fraction must lie in (0, 1)")


def n_train_rows(n: int, train_fraction: float) -> int:
    """Floor rule clamped so both sides keep at least one row."""
    return min(max(int(math.floor(train_fraction * n)), 1), n - 1)


def split(collection: MultiTaskCollection, spec: SplitSpec = SplitSpec()):
    """Seeded per-task random split into (train, test) collections."""
    train, test = [], []
    for t in collection:
        if t.n_samples < 2:
            raise DataError(f"task {t.task_id} has {t.n_samples} sample(s); cannot split")
        rng = np.random.default_rng([spec.seed, t.task_id])
        perm = rng.permutation(t.n_samples)
        k = n_train_rows(t.n_samples, spec.train_fraction)
        train.append(t.subset(np.sort(perm[:k])))
        test.append(t.subset(np.sort(perm[k:])))
    return collection.with_tasks(train), collection.with_tasks(test)


def split_at_boundary(collection: MultiTaskCollection):
    """Split using the recorded per-task boundary (train rows first)."""
    if collection.split_boundary is None:
        raise DataError("collection has no recorded split boundary")
    train = [t.subset(slice(0, b)) for t, b in zip(collection, collection.split_boundary)]
    test = [t.subset(slice(b, None)) for t, b in zip(collection, collection.split_boundary)]
    return collection.with_tasks(train), collection.with_tasks(test)


# -- CSV ---------------------------------------------------------------------


@dataclass(frozen=True)
class CsvSchema:
    """Column mapping for CSV ingestion.

    ``feature_columns=None`` takes every column except the task and target
    columns, in file order.
    """

    task_column: str = "task_id"
    target_column: str = "target"
    feature_columns: tuple | None = None
    kind: ProblemKind = ProblemKind.REGRESSION


def _parse_float(cell: str, row: int, col: str) -> float:
    try:
        v = float(cell)
    except ValueError:
        raise DataError(f"row {row}: column {col!r} is not numeric ({cell!r})") from None
    if not math.isfinite(v):
        raise DataError(f"row {row}: column {col!r} is not finite ({cell!r})")
    return v


def load_collection(path, schema: CsvSchema | None = None) -> MultiTaskCollection:
    """Read a collection from a CSV file or a persisted collection directory."""
    path = Path(path)
    meta = {}
    if path.is_dir():
        meta = json.loads((path / "meta.json").read_text())
        if schema is None:
            schema = CsvSchema(kind=ProblemKind(meta["problem_kind"]))
        path = path / "data.csv"
    schema = schema or CsvSchema()
    kind = ProblemKind(schema.kind)

    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        for col in (schema.task_column, schema.target_column):
            if col not in header:
                raise DataError(f"{path}: missing column {col!r}")
        if schema.feature_columns is None:
            fcols = [h for h in header if h not in (schema.task_column, schema.target_column)]
        else:
            fcols = list(schema.feature_columns)
            missing = [c for c in fcols if c not in header]
            if missing:
                raise DataError(f"{path}: missing feature columns {missing}")
        if not fcols:
            raise DataError(f"{path}: no feature columns")
        ti = header.index(schema.task_column)
        yi = header.index(schema.target_column)
        fi = [header.index(c) for c in fcols]

        rows: dict[int, tuple[list, list]] = {}
        for lineno, rec in enumerate(reader, start=2):
            if not rec or all(not c.strip() for c in rec):
                continue
            if len(rec) != len(header):
                raise DataError(f"row {lineno}: expected {len(header)} cells, got {len(rec)}")
            tv = _parse_float(rec[ti], lineno, schema.task_column)
            if tv != int(tv) or tv < 0:
                raise DataError(f"row {lineno}: task id {rec[ti]!r} is not a non-negative integer")
            x = [_parse_float(rec[j], lineno, header[j]) for j in fi]
            y = _parse_float(rec[yi], lineno, schema.target_column)
            if kind is ProblemKind.CLASSIFICATION and (y != int(y) or y < 0):
                raise DataError(f"row {lineno}: class label {rec[yi]!r} is not a non-negative integer")
            xs, ys = rows.setdefault(int(tv), ([], []))
            xs.append(x)
            ys.append(y)

    if not rows:
        raise DataError(f"{path}: no data rows")
    ids = sorted(rows)
    if ids != list(range(len(ids))):
        gaps = sorted(set(range(max(ids) + 1)) - set(ids))
        raise DataError(f"{path}: tasks {gaps} have zero rows (ids must be contiguous from 0)")
    tasks = [TaskDataset(i, np.array(rows[i][0], dtype=float), np.array(rows[i][1]), kind) for i in ids]
    n_classes = int(meta.get("n_classes", 0)) if kind is ProblemKind.CLASSIFICATION else 0
    return MultiTaskCollection(
        tuple(tasks), n_classes=n_classes, split_boundary=meta.get("split_boundary"), meta=meta
    )


def write_csv(collection: MultiTaskCollection, path) -> None:
    d = collection.n_features
    clf = collection.kind is ProblemKind.CLASSIFICATION
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["task_id", *[f"f{j}" for j in range(d)], "target"])
        for t in collection:
            for x, y in zip(t.features, t.targets):
                w.writerow([t.task_id, *map(repr, x.tolist()), int(y) if clf else repr(float(y))])


def save_collection(collection: MultiTaskCollection, directory, provenance: dict | None = None) -> Path:
    """Persist as ``data.csv`` + ``meta.json`` under ``directory``."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    write_csv(collection, directory / "data.csv")
    meta = {
        "problem_kind": collection.kind.value,
        "n_features": collection.n_features,
        "n_tasks": collection.n_tasks,
        "n_classes": collection.n_classes,
        "split_boundary": list(collection.split_boundary) if collection.split_boundary else None,
        "provenance": provenance if provenance is not None else collection.meta.get("provenance"),
    }
    (directory / "meta.json").write_text(json.dumps(meta, indent=2))
    return directory
