"""Experiment configuration: a YAML document mapped onto ``ExperimentConfig``.

Schema (all keys optional except where noted)::

    source: synthetic            # or a CSV path / persisted collection directory
    kind: regression             # regression | classification
    synthetic: {length_scale: 0.25, kappa: 64, ...}   # generator overrides
    csv: {task_column: task_id, target_column: target, feature_columns: null}
    methods: [rmb-cle, st, dp]
    grids: {st: {rounds: [20, 30, 50, 100]}}          # per-method overrides
    n_repetitions: 20
    train_fraction: 0.8          # CSV sources only
    folds: 5
    learning_rate: 0.1
    metrics: null                # subset of the kind's metrics, null = all
    seed: 0
    output_dir: results
    n_jobs: 1
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import yaml

from .. import boosting
from ..data import ProblemKind
from . import methods
from .metrics import metric_names

SYNTHETIC = "synthetic"


@dataclass
class ExperimentConfig:
    source: str = SYNTHETIC
    kind: str = ProblemKind.REGRESSION.value
    synthetic: dict = field(default_factory=dict)
    csv: dict = field(default_factory=dict)
    methods: list = field(default_factory=lambda: ["rmb-cle", "st", "dp"])
    grids: dict = field(default_factory=dict)
    n_repetitions: int = 1
    train_fraction: float = 0.8
    folds: int = 5
    learning_rate: float = boosting.DEFAULT_LEARNING_RATE
    metrics: list | None = None
    seed: int = 0
    output_dir: str = "results"
    n_jobs: int = 1

    def __post_init__(self):
        self.kind = ProblemKind(self.kind).value
        if not self.methods:
            raise ValueError("at least one method is required")
        for m in self.methods:
            methods.check_method(m)
        if self.n_repetitions < 1:
            raise ValueError("n_repetitions must be >= 1")
        for m, grid in self.grids.items():
            methods.check_method(m)
            if not grid or any(len(v) == 0 for v in grid.values()):
                raise ValueError(f"grid for {m} must be non-empty")
            unknown = set(grid) - set(methods.DEFAULT_GRIDS[m])
            if unknown:
                raise ValueError(f"grid for {m} has unknown blocks {sorted(unknown)}")
        if self.metrics is not None:
            bad = set(self.metrics) - set(metric_names(self.kind))
            if bad:
                raise ValueError(f"metrics {sorted(bad)} do not apply to {self.kind}")
        if self.folds < 2:
            raise ValueError("folds must be >= 2")

    @property
    def problem_kind(self) -> ProblemKind:
        return ProblemKind(self.kind)

    @property
    def is_synthetic(self) -> bool:
        return self.source == SYNTHETIC

    def grid_for(self, method: str) -> dict:
        grid = dict(methods.DEFAULT_GRIDS[method])
        grid.update(self.grids.get(method, {}))
        return grid

    def metric_list(self) -> list:
        return list(self.metrics) if self.metrics is not None else list(metric_names(self.kind))

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys {sorted(unknown)}")
        return cls(**d)


def load_config(path) -> ExperimentConfig:
    data = yaml.safe_load(Path(path).read_text()) or {}
    if not isinstance(data, dict):
        raise ValueError(f"{path}: expected a mapping at the top level")
    return ExperimentConfig.from_dict(data)


def dump_config(config: ExperimentConfig, path) -> None:
    Path(path).write_text(yaml.safe_dump(config.to_dict(), sort_keys=False))
