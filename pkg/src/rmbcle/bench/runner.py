"""Multi-repetition benchmark protocol and its CSV/JSON reports."""

from __future__ import annotations

import csv
import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import synth
from ..clustering import relabel
from ..data import CsvSchema, MultiTaskCollection, SplitSpec, load_collection, split, split_at_boundary
from . import methods
from .config import ExperimentConfig
from .metrics import metrics as compute_metrics
from .search import grid_search

log = logging.getLogger("rmbcle.bench")

TIMING_FIELDS = ("grid_search", "best_fit", "total_train", "predict")


def repetition_seed(seed: int, rep: int) -> int:
    return int(np.random.SeedSequence([seed, rep]).generate_state(1)[0])


@dataclass
class MethodRun:
    rep: int
    method: str
    status: str = "ok"
    error: str | None = None
    params: dict = field(default_factory=dict)
    metrics: dict = field(default_factory=dict)  # task-averaged
    per_task: list = field(default_factory=list)  # one metric dict per task
    times: dict = field(default_factory=dict)
    partition: list | None = None

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    def to_dict(self, timing: bool = True) -> dict:
        d = {
            "rep": self.rep,
            "method": self.method,
            "status": self.status,
            "error": self.error,
            "params": self.params,
            "metrics": self.metrics,
            "per_task": self.per_task,
            "partition": self.partition,
        }
        if timing:
            d["times"] = self.times
        return d


def _mean_std(values) -> tuple:
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        return float("nan"), float("nan")
    return float(v.mean()), float(v.std(ddof=1)) if v.size > 1 else 0.0


@dataclass
class RunReport:
    config: ExperimentConfig
    runs: list
    truths: dict = field(default_factory=dict)  # rep -> ground-truth partition

    @property
    def failures(self) -> list:
        return [r for r in self.runs if not r.ok]

    @property
    def complete(self) -> bool:
        return not self.failures

    def method_runs(self, method: str) -> list:
        return [r for r in self.runs if r.method == method and r.ok]

    def aggregate(self) -> dict:
        """method -> {metric: (mean, std)} over repetitions of task-averaged values."""
        out = {}
        for m in self.config.methods:
            runs = self.method_runs(m)
            agg = {k: _mean_std([r.metrics[k] for r in runs]) for k in self.config.metric_list()}
            agg.update({f"time_{k}": _mean_std([r.times[k] for r in runs]) for k in TIMING_FIELDS})
            agg["n_ok"] = len(runs)
            out[m] = agg
        return out

    def recovery(self) -> dict:
        """Exact-recovery rate per clustering method, when truth is known."""
        out = {}
        for m in self.config.methods:
            if m not in methods.CLUSTERED:
                continue
            runs = [r for r in self.method_runs(m) if r.rep in self.truths]
            if runs:
                hits = [np.array_equal(relabel(r.partition), relabel(self.truths[r.rep])) for r in runs]
                out[m] = float(np.mean(hits))
        return out

    def to_dict(self, timing: bool = True) -> dict:
        agg = self.aggregate()
        if not timing:
            agg = {m: {k: v for k, v in a.items() if not k.startswith("time_")} for m, a in agg.items()}
        return {
            "config": self.config.to_dict(),
            "aggregate": {m: {k: list(v) if isinstance(v, tuple) else v for k, v in a.items()} for m, a in agg.items()},
            "recovery": self.recovery(),
            "truths": {str(k): list(v) for k, v in self.truths.items()},
            "failures": [{"rep": r.rep, "method": r.method, "error": r.error} for r in self.failures],
            "runs": [r.to_dict(timing) for r in self.runs],
        }


def load_dataset(config: ExperimentConfig, rep: int):
    """(train, test, truth partition or None) for one repetition."""
    seed = repetition_seed(config.seed, rep)
    if config.is_synthetic:
        spec = synth.benchmark_preset(config.kind, seed=seed, **config.synthetic)
        coll, truth = synth.generate(spec)
        train, test = split_at_boundary(coll)
        return train, test, truth.assignment.tolist()
    opts = dict(config.csv)
    if opts.get("feature_columns") is not None:
        opts["feature_columns"] = tuple(opts["feature_columns"])
    schema = CsvSchema(kind=config.problem_kind, **opts)
    coll: MultiTaskCollection = load_collection(config.source, schema)
    train, test = split(coll, SplitSpec(config.train_fraction, seed))
    prov = coll.meta.get("provenance") or {}
    return train, test, prov.get("ground_truth")


def run_method(config: ExperimentConfig, method: str, rep: int, train, test, truth) -> MethodRun:
    run = MethodRun(rep, method)
    seed = repetition_seed(config.seed, rep)
    try:
        partition = truth if method in methods.NEEDS_PARTITION else None
        if method in methods.NEEDS_PARTITION and truth is None:
            raise ValueError(f"{method} needs a ground-truth partition, which this source lacks")
        t0 = time.perf_counter()
        res = grid_search(method, train, config.grid_for(method), config.folds, seed, config.learning_rate, partition)
        t1 = time.perf_counter()
        model = methods.fit_method(method, train, res.best, config.learning_rate, partition)
        t2 = time.perf_counter()
        preds = methods.predict_tasks(model, test)
        t3 = time.perf_counter()
        names = config.metric_list()
        for p, t in zip(preds, test):
            m = compute_metrics(p, t.targets, test.kind, test.n_classes or None)
            row = {k: m[k] for k in names}
            if "absent_classes" in m:
                row["absent_classes"] = m["absent_classes"]
            run.per_task.append(row)
        run.metrics = {k: float(np.mean([r[k] for r in run.per_task])) for k in names}
        run.params = {k: int(v) for k, v in res.best.items()}
        run.times = {"grid_search": t1 - t0, "best_fit": t2 - t1, "total_train": t2 - t0, "predict": t3 - t2}
        part = methods.partition_of(model)
        run.partition = None if part is None else [int(c) for c in part]
    except Exception as exc:  # recorded per method, the run continues
        log.error("repetition %d, method %s failed: %s", rep, method, exc)
        run.status = "failed"
        run.error = f"{type(exc).__name__}: {exc}"
    return run


def run_repetition(config: ExperimentConfig, rep: int):
    try:
        train, test, truth = load_dataset(config, rep)
    except Exception as exc:
        log.error("repetition %d: loading data failed: %s", rep, exc)
        err = f"{type(exc).__name__}: {exc}"
        return rep, [MethodRun(rep, m, "failed", err) for m in config.methods], None
    runs =[run_method(config, m, rep, train, test, truth) for m in config.methods]
    return rep, runs, truth


def run_benchmark(config: ExperimentConfig, output_dir=None, write: bool = True) -> RunReport:
    """Every repetition draws fresh data, grid-searches each method, refits
    the best point and evaluates on the held-out rows."""
    reps = range(config.n_repetitions)
    if config.n_jobs > 1 and config.n_repetitions > 1:
        with ProcessPoolExecutor(max_workers=config.n_jobs) as pool:
            results = list(pool.map(run_repetition, [config] * len(reps), reps))
    else:
        results = [run_repetition(config, r) for r in reps]
    runs, truths = [], {}
    for rep, rr, truth in sorted(results, key=lambda x: x[0]):
        runs.extend(rr)
        if truth is not None:
            truths[rep] = list(truth)
    report = RunReport(config, runs, truths)
    if write:
        write_report(report, output_dir or config.output_dir)
    return report


# -- report files ------------------------------------------------------------


def _write_rows(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def write_report(report: RunReport, directory) -> Path:
    """runs.csv, per_task.csv, aggregate.csv, partitions.csv, truth.csv, report.json."""
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    names = report.config.metric_list()

    rows = []
    for r in report.runs:
        vals = [repr(r.metrics[k]) if r.ok else "" for k in names]
        ts = [repr(r.times[k]) if r.ok else "" for k in TIMING_FIELDS]
        rows.append([r.rep, r.method, r.status, *vals, *ts, json.dumps(r.params, sort_keys=True), r.error or ""])
    _write_rows(out / "runs.csv", ["rep", "method", "status", *names, *(f"time_{k}" for k in TIMING_FIELDS), "params", "error"], rows)

    rows = []
    for r in report.runs:
        for t, m in enumerate(r.per_task):
            absent = ";".join(str(c) for c in m.get("absent_classes", []))
            rows.append([r.rep, r.method, t, *(repr(m[k]) for k in names), absent])
    _write_rows(out / "per_task.csv", ["rep", "method", "task_id", *names, "absent_classes"], rows)

    agg = report.aggregate()
    cols = [*names, *(f"time_{k}" for k in TIMING_FIELDS)]
    rows = []
    for m, a in agg.items():
        rows.append([m, a["n_ok"], *(repr(x) for c in cols for x in a[c])])
    _write_rows(out / "aggregate.csv", ["method", "n_ok", *(f"{c}_{s}" for c in cols for s in ("mean", "std"))], rows)

    rows = [[r.rep, r.method, t, c] for r in report.runs if r.partition is not None for t, c in enumerate(r.partition)]
    _write_rows(out / "partitions.csv", ["rep", "method", "task_id", "cluster"], rows)
    if report.truths:
        rows = [[rep, t, c] for rep, p in sorted(report.truths.items()) for t, c in enumerate(p)]
        _write_rows(out / "truth.csv", ["rep", "task_id", "cluster"], rows)

    (out / "report.json").write_text(json.dumps(report.to_dict(), indent=2))
    return out
