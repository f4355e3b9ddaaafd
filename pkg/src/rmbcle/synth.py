"""Random-Fourier-feature multi-task generator with planted task clusters."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .data import MultiTaskCollection, ProblemKind, TaskDataset

# SeedSequence stream tags
_CLUSTER_FN, _TASK_FN, _INPUTS, _NOISE = 0, 1, 2, 3


@dataclass(frozen=True)
class RffParams:
    weights: np.ndarray  # (kappa,)
    directions: np.ndarray  # (kappa, d)
    phases: np.ndarray  # (kappa,)
    scale: float = 1.0
    length_scale: float = 1.0

    def __post_init__(self):
        if self.scale <= 0 or self.length_scale <= 0:
            raise ValueError("scale and length_scale must be positive")
        k = len(self.weights)
        if self.directions.shape[0] != k or len(self.phases) != k:
            raise ValueError("weights, directions and phases disagree on kappa")

    @property
    def kappa(self) -> int:
        return len(self.weights)

    @property
    def dim(self) -> int:
        return self.directions.shape[1]

    @classmethod
    def sample(cls, rng, kappa: int, dim: int, scale=1.0, length_scale=1.0) -> "RffParams":
        return cls(
            weights=rng.standard_normal(kappa),
            directions=rng.standard_normal((kappa, dim)),
            phases=rng.uniform(0.0, 2 * np.pi, kappa),
            scale=scale,
            length_scale=length_scale,
        )

    def to_dict(self) -> dict:
        return {
            "weights": self.weights.tolist(),
            "directions": self.directions.tolist(),
            "phases": self.phases.tolist(),
            "scale": self.scale,
            "length_scale": self.length_scale,
        }


def rff_eval(params: RffParams, x) -> np.ndarray | float:
    """sqrt(2 tau / kappa) * sum_r phi_r cos(<w_r, x> / (lambda d) + b_r).

    Accepts a single vector of length d or an (n, d) batch.
    """
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != params.dim:
        raise ValueError(f"expected inputs of dimension {params.dim}, got {x.shape[-1]}")
    proj = x @ params.directions.T / (params.length_scale * params.dim) + params.phases
    out = np.sqrt(2.0 * params.scale / params.kappa) * (np.cos(proj) @ params.weights)
    return float(out) if x.ndim == 1 else out


@dataclass(frozen=True)
class SyntheticSpec:
    n_clusters: int = 5
    tasks_per_cluster: int = 5
    omega: float = 0.9
    dim: int = 5
    kappa: int = 64
    tau: float = 1.0
    length_scale: float = 0.25
    n_train: int = 300
    n_test: int = 1000
    kind: ProblemKind = ProblemKind.REGRESSION
    seed: int = 0
    noise: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "kind", ProblemKind(self.kind))
        if self.n_clusters < 1 or self.tasks_per_cluster < 1:
            raise ValueError("need at least one cluster and one task per cluster")
        if not 0.0 < self.omega <= 1.0:
            raise ValueError("omega must lie in (0, 1]")
        if self.dim < 1 or self.kappa < 1:
            raise ValueError("dim and kappa must be >= 1")
        if self.n_train < 1 or self.n_test < 0:
            raise ValueError("n_train must be >= 1 and n_test >= 0")
        if self.noise < 0:
            raise ValueError("noise must be non-negative")

    @property
    def n_tasks(self) -> int:
        return self.n_clusters * self.tasks_per_cluster

    def to_dict(self) -> dict:
        d = asdict(self)
        d["kind"] = self.kind.value
        return d


def benchmark_preset(kind=ProblemKind.REGRESSION, seed: int = 0, **overrides) -> SyntheticSpec:
    """25 tasks in five clusters, omega 0.9, d=5, 300 train / 1000 test rows."""
    return SyntheticSpec(kind=ProblemKind(kind), seed=seed, **overrides)


@dataclass(frozen=True)
class GroundTruth:
    assignment: np.ndarray
    cluster_functions: tuple
    task_functions: tuple
    omega: float

    def task_function(self, task_id: int):
        """Noise-free target function of a task (regression scale)."""
        cc = self.cluster_functions[self.assignment[task_id]]
        ts = self.task_functions[task_id]
        w = self.omega
        return lambda X: w * rff_eval(cc, X) + (1.0 - w) * rff_eval(ts, X)


def ground_truth_assignment(n_clusters: int, tasks_per_cluster: int) -> np.ndarray:
    return np.repeat(np.arange(n_clusters), tasks_per_cluster)


def _rng(seed: int, stream: int, index: int):
    return np.random.default_rng([seed, stream, index])


def generate(spec: SyntheticSpec):
    """Draw a collection and its ground truth.

    Each task holds ``n_train + n_test`` rows, training rows first; the
    boundary is recorded on the collection. Classification labels are 1
    strictly above the task's median over all its rows, else 0.
    """
    assignment = ground_truth_assignment(spec.n_clusters, spec.tasks_per_cluster)
    cluster_fns = tuple(
        RffParams.sample(_rng(spec.seed, _CLUSTER_FN, c), spec.kappa, spec.dim, spec.tau, spec.length_scale)
        for c in range(spec.n_clusters)
    )
    task_fns = tuple(
        RffParams.sample(_rng(spec.seed, _TASK_FN, t), spec.kappa, spec.dim, spec.tau, spec.length_scale)
        for t in range(spec.n_tasks)
    )
    truth = GroundTruth(assignment, cluster_fns, task_fns, spec.omega)

    n = spec.n_train + spec.n_test
    tasks = []
    for t in range(spec.n_tasks):
        X = _rng(spec.seed, _INPUTS, t).uniform(-1.0, 1.0, (n, spec.dim))
        y = truth.task_function(t)(X)
        if spec.noise > 0:
            y = y + spec.noise * _rng(spec.seed, _NOISE, t).standard_normal(n)
        if spec.kind is ProblemKind.CLASSIFICATION:
            y = (y > np.median(y)).astype(np.int64)
        tasks.append(TaskDataset(t, X, y, spec.kind))

    meta = {
        "provenance": {
            "generator": "rff-clusters",
            "spec": spec.to_dict(),
            "ground_truth": assignment.tolist(),
        }
    }
    coll = MultiTaskCollection(
        tuple(tasks),
        n_classes=2 if spec.kind is ProblemKind.CLASSIFICATION else 0,
        split_boundary=tuple([spec.n_train] * spec.n_tasks),
        meta=meta,
    )
    return coll, truth
