"""``rmbcle`` command line: synth, train, predict, bench, cluster-report, stability, ranks."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .. import baselines, pipeline, synth
from ..clustering import cut, silhouette
from ..data import CsvSchema, DataError, ProblemKind, load_collection, save_collection, split_at_boundary
from ..similarity import SimilaritySource
from . import methods
from .config import ExperimentConfig, load_config
from .metrics import HIGHER_IS_BETTER, metrics as compute_metrics
from .reports import rank_table, stability_report
from .runner import run_benchmark
from .search import grid_search

log = logging.getLogger("rmbcle")


# -- helpers -----------------------------------------------------------------


def _load_data(args):
    path = Path(args.data)
    if path.is_dir():
        return load_collection(path)
    schema = CsvSchema(args.task_column, args.target_column, kind=ProblemKind(args.kind))
    return load_collection(path, schema)


def _train_part(coll, rows: str):
    if rows == "boundary" and coll.split_boundary is not None:
        return split_at_boundary(coll)[0]
    return coll


def _read_assignment(path) -> np.ndarray:
    """task_id,cluster CSV; a rep column, if present, must agree across reps."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    by_rep: dict = {}
    for r in rows:
        by_rep.setdefault(r.get("rep", "0"), {})[int(r["task_id"])] = int(r["cluster"])
    parts = [np.array([d[t] for t in sorted(d)]) for d in by_rep.values()]
    if any(not np.array_equal(p, parts[0]) for p in parts):
        raise DataError(f"{path}: partitions differ across repetitions")
    return parts[0]


def _parse_params(items) -> dict:
    out = {}
    for item in items or []:
        key, _, value = item.partition("=")
        if not value:
            raise ValueError(f"expected key=value, got {item!r}")
        out[key.replace("-", "_")] = int(value)
    return out


def _truth_from(coll):
    prov = coll.meta.get("provenance") or {}
    gt = prov.get("ground_truth")
    return None if gt is None else np.asarray(gt)


def save_fitted(model, method: str, params: dict, directory) -> Path:
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    if isinstance(model, pipeline.RmbCleModel):
        pipeline.save_model(model, out / "model")
        rel = "model"
    else:
        rel = str(baselines.save_baseline(model, out).relative_to(out))
    (out / "train.json").write_text(json.dumps({"method": method, "params": params, "model": rel}, indent=2))
    return out


def load_fitted(directory):
    directory = Path(directory)
    info = json.loads((directory / "train.json").read_text())
    path = directory / info["model"]
    if info["method"] in methods.CLUSTERED:
        return pipeline.load_model(path), info
    return baselines.load_baseline(path), info


# -- subcommands -------------------------------------------------------------


def cmd_synth(args) -> int:
    overrides = {
        k: getattr(args, k)
        for k in ("n_clusters", "tasks_per_cluster", "omega", "dim", "kappa", "tau", "length_scale", "n_train", "n_test", "noise")
        if getattr(args, k) is not None
    }
    spec = synth.benchmark_preset(args.kind, seed=args.seed, **overrides)
    coll, truth = synth.generate(spec)
    out = save_collection(coll, args.out)
    pipeline.write_partition(out / "truth.csv", truth.assignment)
    print(f"wrote {coll.n_tasks} tasks ({coll.kind.value}) to {out}")
    return 0


def cmd_train(args) -> int:
    method = methods.check_method(args.method)
    coll = _load_data(args)
    train = _train_part(coll, args.rows)
    partition = None
    if method in methods.NEEDS_PARTITION:
        partition = _read_assignment(args.partition) if args.partition else _truth_from(coll)
        if partition is None:
            raise DataError(f"{method} needs --partition (or data with a recorded ground truth)")
    params = _parse_params(args.param)
    if args.search:
        grid = dict(methods.DEFAULT_GRIDS[method])
        grid.update({k: [v] for k, v in params.items()})
        params = grid_search(method, train, grid, args.folds, args.seed, args.learning_rate, partition).best
    else:
        defaults = {k: v[-1] for k, v in methods.DEFAULT_GRIDS[method].items()}
        params = {**defaults, **params}
    model = methods.fit_method(method, train, params, args.learning_rate, partition)
    save_fitted(model, method, {k: int(v) for k, v in params.items()}, args.out)
    part = methods.partition_of(model)
    msg = f"trained {method} with {params}"
    if part is not None:
        msg += f"; partition {part.tolist()}"
    print(msg)
    return 0


def cmd_predict(args) -> int:
    model, info = load_fitted(args.model)
    coll = _load_data(args)
    if args.rows == "test" and coll.split_boundary is not None:
        coll = split_at_boundary(coll)[1]
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    scores = []
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["task_id", "row", "prediction", "target"])
        for t in coll:
            pred = model.predict(t.task_id, t.features)
            for i, (p, y) in enumerate(zip(pred, t.targets)):
                w.writerow([t.task_id, i, repr(p.item()), repr(y.item())])
            scores.append(compute_metrics(pred, t.targets, coll.kind, coll.n_classes or None))
    names = [k for k in scores[0] if k != "absent_classes"]
    summary = {k: float(np.mean([s[k] for s in scores])) for k in names}
    print(f"{info['method']}: " + ", ".join(f"{k}={v:.4f}" for k, v in summary.items()))
    return 0


def cmd_bench(args) -> int:
    cfg = load_config(args.config).to_dict() if args.config else {}
    overrides = {
        "output_dir": args.out,
        "n_repetitions": args.reps,
        "seed": args.seed,
        "kind": args.kind,
        "source": args.source,
        "folds": args.folds,
        "n_jobs": args.n_jobs,
        "methods": args.methods.split(",") if args.methods else None,
    }
    cfg.update({k: v for k, v in overrides.items() if v is not None})
    config = ExperimentConfig.from_dict(cfg)
    report = run_benchmark(config)
    agg = report.aggregate()
    for m, a in agg.items():
        vals = ", ".join(f"{k}={a[k][0]:.4f}±{a[k][1]:.4f}" for k in config.metric_list())
        print(f"{m:>20}: {vals}  ({a['n_ok']}/{config.n_repetitions} ok)")
    for m, r in report.recovery().items():
        print(f"{m:>20}: exact recovery {r:.2f}")
    if not report.complete:
        for f in report.failures:
            print(f"FAILED rep {f.rep} {f.method}: {f.error}", file=sys.stderr)
        return 1
    return 0


def cmd_cluster_report(args) -> int:
    coll = _train_part(_load_data(args), args.rows)
    config = pipeline.RmbCleConfig(
        per_task_rounds=args.per_task_rounds,
        learning_rate=args.learning_rate,
        epsilon=args.epsilon,
        k_max=args.k_max,
        similarity_source=SimilaritySource(args.similarity_source),
        linkage=args.linkage,
    )
    geom, dendro, part = pipeline.discover_partition(coll, config)
    out = Path(args.out)
    pipeline.write_geometry(out / "geometry", geom)
    (out / "dendrogram.json").write_text(json.dumps(dendro.to_dict(), indent=2))
    pipeline.write_partition(out / "partition.csv", part.assignment)
    with open(out / "silhouette.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["k", "mean_silhouette"])
        for k in range(2, min(coll.n_tasks, config.k_max) + 1):
            w.writerow([k, repr(silhouette(geom.distances, cut(dendro, k).assignment)[1])])
    print(f"k*={part.k}, mean silhouette {part.mean_silhouette:.4f}, partition {part.assignment.tolist()}")
    return 0


def cmd_stability(args) -> int:
    with open(args.partitions, newline="") as fh:
        rows = [r for r in csv.DictReader(fh) if args.method is None or r.get("method") == args.method]
    if not rows:
        raise DataError(f"{args.partitions}: no partitions" + (f" for {args.method}" if args.method else ""))
    runs: dict = {}
    for r in rows:
        runs.setdefault(int(r.get("rep", 0)), {})[int(r["task_id"])] = int(r["cluster"])
    parts = [np.array([d[t] for t in sorted(d)]) for _, d in sorted(runs.items())]
    truth = _read_assignment(args.truth) if args.truth else None
    rep = stability_report(parts, truth)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "frequencies.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["task_id", *range(rep.frequencies.shape[1])])
        for i, row in enumerate(rep.frequencies):
            w.writerow([i, *map(repr, row.tolist())])
    summary = {"n_runs": rep.n_runs, "exact_recovery": rep.exact_recovery}
    (out / "stability.json").write_text(json.dumps(summary, indent=2))
    print(f"{rep.n_runs} runs" + ("" if rep.exact_recovery is None else f", exact recovery {rep.exact_recovery:.2f}"))
    return 0


def cmd_ranks(args) -> int:
    with open(args.per_task, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows or args.metric not in rows[0]:
        raise DataError(f"{args.per_task}: no column {args.metric!r}")
    cells: dict = {}
    for r in rows:
        cells.setdefault(r["method"], {}).setdefault(int(r["task_id"]), []).append(float(r[args.metric]))
    tasks = sorted({t for d in cells.values() for t in d})
    missing = [(m, t) for m, d in cells.items() for t in tasks if t not in d]
    if missing:
        raise DataError(f"missing cells: {missing[:5]}")
    table = {m: [float(np.mean(d[t])) for t in tasks] for m, d in cells.items()}
    ranks = rank_table(table, HIGHER_IS_BETTER.get(args.metric, True))
    lines = sorted(ranks.items(), key=lambda kv: kv[1])
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        with open(args.out, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["method", "mean_rank"])
            w.writerows([m, repr(r)] for m, r in lines)
    for m, r in lines:
        print(f"{m:>20}: {r:.3f}")
    return 0


# -- parser ------------------------------------------------------------------


def _data_args(p, rows_default="boundary"):
    p.add_argument("--data", required=True, help="CSV file or persisted collection directory")
    p.add_argument("--kind", default="regression", choices=[k.value for k in ProblemKind], help="problem kind for plain CSV input")
    p.add_argument("--task-column", default="task_id")
    p.add_argument("--target-column", default="target")
    p.add_argument("--rows", default=rows_default, choices=["boundary", "test", "all"],
                   help="which rows to use when the data records a train/test boundary")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="rmbcle", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a clustered synthetic collection")
    p.add_argument("--kind", default="regression", choices=[k.value for k in ProblemKind])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    for name, typ in (("n-clusters", int), ("tasks-per-cluster", int), ("omega", float), ("dim", int), ("kappa", int),
                      ("tau", float), ("length-scale", float), ("n-train", int), ("n-test", int), ("noise", float)):
        p.add_argument(f"--{name}", type=typ, default=None)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="fit one method and persist it")
    _data_args(p)
    p.add_argument("--method", required=True, choices=methods.METHODS)
    p.add_argument("--out", required=True)
    p.add_argument("--param", action="append", metavar="BLOCK=SIZE", help="block size, e.g. per_task_rounds=50")
    p.add_argument("--partition", help="task_id,cluster CSV for cluster-known methods")
    p.add_argument("--search", action="store_true", help="choose unset block sizes by cross-validation")
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--learning-rate", type=float, default=0.1)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="score a CSV with a persisted model")
    _data_args(p, rows_default="test")
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("bench", help="run the full benchmark protocol")
    p.add_argument("--config", help="YAML experiment config")
    p.add_argument("--out")
    p.add_argument("--reps", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--kind", choices=[k.value for k in ProblemKind])
    p.add_argument("--source")
    p.add_argument("--methods", help="comma-separated method names")
    p.add_argument("--folds", type=int)
    p.add_argument("--n-jobs", type=int)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("cluster-report", help="export E, S, distances, dendrogram and partition")
    _data_args(p)
    p.add_argument("--out", required=True)
    p.add_argument("--per-task-rounds", type=int, default=100)
    p.add_argument("--learning-rate", type=float, default=0.1)
    p.add_argument("--epsilon", type=float, default=1e-8)
    p.add_argument("--k-max", type=int, default=10)
    p.add_argument("--similarity-source", default="cross-task-error", choices=[s.value for s in SimilaritySource])
    p.add_argument("--linkage", default="average", choices=["average", "complete"])
    p.set_defaults(func=cmd_cluster_report)

    p = sub.add_parser("stability", help="task-by-cluster assignment frequencies")
    p.add_argument("--partitions", required=True, help="partitions.csv from a bench run")
    p.add_argument("--method", default=None)
    p.add_argument("--truth", help="task_id,cluster CSV of the true partition")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_stability)

    p = sub.add_parser("ranks", help="average ranks across tasks from per_task.csv")
    p.add_argument("--per-task", required=True)
    p.add_argument("--metric", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_ranks)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (DataError, ValueError, FileNotFoundError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
