import csv
import json
import logging

import numpy as np
import pytest

from rmbcle.bench.config import ExperimentConfig, dump_config, load_config
from rmbcle.bench.runner import MethodRun, RunReport, repetition_seed, run_benchmark

SMALL = {"n_clusters": 2, "tasks_per_cluster": 2, "n_train": 40, "n_test": 30}
SMALL_GRIDS = {
    "st": {"rounds": [5, 10]},
    "dp": {"rounds": [5, 10]},
    "taf": {"rounds": [5, 10]},
    "mtgb": {"shared": [5], "specific": [0, 5]},
    "rmb-cle": {"per_task_rounds": [10], "local_rounds": [5, 10]},
    "rmb-cle-mtgb": {"per_task_rounds": [10], "local_shared": [5], "local_specific": [0, 5]},
    "cluster-known": {"local_rounds": [5, 10]},
    "cluster-known-mtgb": {"local_shared": [5], "local_specific": [0, 5]},
}


def smoke_config(tmp_path, **kw):
    base = dict(
        synthetic=SMALL,
        methods=list(SMALL_GRIDS),
        grids=SMALL_GRIDS,
        n_repetitions=2,
        folds=3,
        output_dir=str(tmp_path / "out"),
    )
    base.update(kw)
    return ExperimentConfig(**base)


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


@pytest.fixture(scope="module")
def smoke(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("smoke")
    cfg = smoke_config(tmp)
    return cfg, run_benchmark(cfg)


def test_smoke_emits_all_files(smoke):
    cfg, report = smoke
    assert report.complete
    for name in ("runs.csv", "per_task.csv", "aggregate.csv", "partitions.csv", "truth.csv", "report.json"):
        assert (cfg_dir(cfg) / name).stat().st_size > 0
    runs = read_csv(cfg_dir(cfg) / "runs.csv")
    assert len(runs) == 2 * len(SMALL_GRIDS)
    assert {r["status"] for r in runs} == {"ok"}
    js = json.loads((cfg_dir(cfg) / "report.json").read_text())
    assert set(js["aggregate"]) == set(SMALL_GRIDS)


def cfg_dir(cfg):
    from pathlib import Path

    return Path(cfg.output_dir)


def test_audit_aggregate_from_raw_csvs(smoke):
    cfg, _ = smoke
    out = cfg_dir(cfg)
    names = cfg.metric_list()
    per_task = read_csv(out / "per_task.csv")
    runs = read_csv(out / "runs.csv")
    # runs.csv task averages come from per_task.csv
    for r in runs:
        cells = [p for p in per_task if p["rep"] == r["rep"] and p["method"] == r["method"]]
        assert len(cells) == 4
        for k in names:
            assert float(r[k]) == pytest.approx(np.mean([float(p[k]) for p in cells]), rel=1e-12)
    # aggregate.csv comes from runs.csv
    for a in read_csv(out / "aggregate.csv"):
        mine = [r for r in runs if r["method"] == a["method"] and r["status"] == "ok"]
        assert int(a["n_ok"]) == len(mine)
        for k in [*names, "time_grid_search", "time_best_fit", "time_total_train", "time_predict"]:
            v = np.array([float(r[k]) for r in mine])
            assert float(a[f"{k}_mean"]) == pytest.approx(v.mean(), rel=1e-12)
            assert float(a[f"{k}_std"]) == pytest.approx(v.std(ddof=1), rel=1e-12, abs=1e-15)


def test_partitions_recorded_for_clustering_methods(smoke):
    cfg, report = smoke
    parts = read_csv(cfg_dir(cfg) / "partitions.csv")
    methods_with = {p["method"] for p in parts}
    assert {"rmb-cle", "rmb-cle-mtgb", "cluster-known", "cluster-known-mtgb"} <= methods_with
    assert not methods_with & {"st", "dp", "taf", "mtgb"}
    for r in report.runs:
        if r.method.startswith("cluster-known"):
            assert r.partition == report.truths[r.rep]


def test_timing_components_consistent(smoke):
    _, report = smoke
    for r in report.runs:
        t = r.times
        assert t["total_train"] == pytest.approx(t["grid_search"] + t["best_fit"])
        assert min(t.values()) >= 0


def test_determinism_excluding_timing(tmp_path):
    cfg = smoke_config(tmp_path, methods=["rmb-cle", "mtgb"], n_repetitions=1)
    a = run_benchmark(cfg, write=False).to_dict(timing=False)
    b = run_benchmark(cfg, write=False).to_dict(timing=False)
    assert a == b


def test_parallel_repetitions_match_serial(tmp_path):
    cfg = smoke_config(tmp_path, methods=["st", "rmb-cle"])
    serial = run_benchmark(cfg, write=False).to_dict(timing=False)
    cfg.n_jobs = 2
    pooled = run_benchmark(cfg, write=False).to_dict(timing=False)
    serial.pop("config"), pooled.pop("config")
    assert pooled == serial


def test_repetitions_draw_fresh_data(smoke):
    _, report = smoke
    a, b = (r for r in report.runs if r.method == "st")
    assert a.metrics != b.metrics
    assert repetition_seed(0, 0) != repetition_seed(0, 1)


def _run(rep, per_task_rmse):
    return MethodRun(rep, "st", metrics={"rmse": float(np.mean(per_task_rmse)), "mae": 0.0},
                     per_task=[{"rmse": v, "mae": 0.0} for v in per_task_rmse],
                     times={k: 1.0 for k in ("grid_search", "best_fit", "total_train", "predict")})


def test_aggregation_is_tasks_then_repetitions():
    # repetition means are 2 and 2; task means over repetitions are 1.5 and 2.5
    cfg = ExperimentConfig(methods=["st"])
    report = RunReport(cfg, [_run(0, [1.0, 3.0]), _run(1, [2.0, 2.0])])
    mean, std = report.aggregate()["st"]["rmse"]
    assert mean == 2.0
    assert std == 0.0  # reps-then-tasks would give about 0.707


def test_single_repetition_std_is_zero():
    report = RunReport(ExperimentConfig(methods=["st"]), [_run(0, [1.0, 3.0])])
    assert report.aggregate()["st"]["rmse"] == (2.0, 0.0)


def _write_plain_csv(path):
    g = np.random.default_rng(0)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["task_id", "x0", "x1", "target"])
        for t in range(3):
            for _ in range(30):
                x = g.uniform(-1, 1, 2)
                w.writerow([t, x[0], x[1], np.sin(3 * x[0]) + t])


def test_failure_is_logged_and_recorded(tmp_path, caplog):
    src = tmp_path / "plain.csv"
    _write_plain_csv(src)
    cfg = ExperimentConfig(source=str(src), methods=["st", "cluster-known"], grids={"st": {"rounds": [5]}},
                           output_dir=str(tmp_path / "o"))
    with caplog.at_level(logging.ERROR, logger="rmbcle.bench"):
        report = run_benchmark(cfg)
    assert not report.complete
    (fail,) = report.failures
    assert fail.method == "cluster-known" and "ground-truth" in fail.error
    assert "cluster-known failed" in caplog.text
    runs = read_csv(tmp_path / "o" / "runs.csv")
    assert [r["status"] for r in runs] == ["ok", "failed"]
    assert report.aggregate()["cluster-known"]["n_ok"] == 0


def test_missing_source_fails_every_method(tmp_path):
    cfg = ExperimentConfig(source=str(tmp_path / "nope.csv"), methods=["st", "dp"])
    report = run_benchmark(cfg, write=False)
    assert len(report.failures) == 2


def test_config_validation_and_round_trip(tmp_path):
    with pytest.raises(ValueError):
        ExperimentConfig(n_repetitions=0)
    with pytest.raises(ValueError):
        ExperimentConfig(grids={"st": {"rounds": []}})
    with pytest.raises(ValueError):
        ExperimentConfig(grids={"st": {"shared": [5]}})
    with pytest.raises(ValueError):
        ExperimentConfig(methods=["xgb"])
    with pytest.raises(ValueError):
        ExperimentConfig(kind="classification", metrics=["rmse"])
    cfg = smoke_config(tmp_path)
    dump_config(cfg, tmp_path / "c.yaml")
    assert load_config(tmp_path / "c.yaml") == cfg


def test_rmbcle_trains_faster_than_mtgb_on_preset():
    # timing is reported as a mean over repetitions; single runs are noisy
    cfg = ExperimentConfig(methods=["rmb-cle", "mtgb"], n_repetitions=3)
    agg = run_benchmark(cfg, write=False).aggregate()
    rmb, mtgb = agg["rmb-cle"]["time_total_train"][0], agg["mtgb"]["time_total_train"][0]
    print(f"mean total train over 3 repetitions: rmb-cle {rmb:.2f}s, mtgb {mtgb:.2f}s")
    assert rmb < mtgb
