"""Acceptance criteria, each checked at its stated tolerance.

Every test appends one PASS/FAIL line to the acceptance summary printed at
the end of the run. Heavy work on the synthetic preset (20 repetitions per
problem kind) is computed once in a module fixture.
"""

import time
from dataclasses import replace

import numpy as np
import pytest

from conftest import ACCEPTANCE
from oracles import naive_agglomerate
from rmbcle import pipeline, synth
from rmbcle.baselines import BaselineConfig, train_baseline
from rmbcle.bench.metrics import metrics
from rmbcle.bench.runner import repetition_seed
from rmbcle.boosting import fit, fit_stump, make_loss
from rmbcle.clustering import cluster_tasks, relabel, select_k, upgma
from rmbcle.data import MultiTaskCollection, split_at_boundary
from rmbcle.similarity import SimilaritySource
from rmbcle.theory import random_discrete_task, verify_classification_bound, verify_regression_decomposition

N_REPS = 20
KINDS = ("regression", "classification")
CONFIG = pipeline.RmbCleConfig()


def verdict(number, title, ok, detail):
    line = f"criterion {number:>2} {'PASS' if ok else 'FAIL'}  {title}: {detail}"
    ACCEPTANCE.append(line)
    print(line)
    return ok


def same_partition(a, b) -> bool:
    return np.array_equal(relabel(a), relabel(b))


def task_mean(preds, test, key):
    return float(np.mean([metrics(p, t.targets, test.kind, test.n_classes or None)[key] for p, t in zip(preds, test)]))


def _one_repetition(kind, rep):
    coll, truth = synth.generate(synth.benchmark_preset(kind, seed=repetition_seed(0, rep)))
    train, test = split_at_boundary(coll)
    ptm = pipeline.fit_per_task(train, CONFIG.per_task_rounds, CONFIG.learning_rate)
    geom, _, part = pipeline.discover_partition(train, CONFIG, ptm)
    complete = cluster_tasks(geom.distances, CONFIG.k_max, "complete")[1].assignment
    pseudo_cfg = replace(CONFIG, similarity_source=SimilaritySource.PSEUDO_RESIDUAL)
    pseudo = pipeline.discover_partition(train, pseudo_cfg, ptm)[2].assignment
    rmb = pipeline.train(train, CONFIG, per_task_models=ptm)
    assert np.array_equal(rmb.assignment, part.assignment)
    rmb_pred = [rmb.predict(t.task_id, t.features) for t in test]
    exact = same_partition(part.assignment, truth.assignment)
    ck_pred = None
    if exact:
        ck = train_baseline("cluster-known", train, BaselineConfig(rmbcle=CONFIG, partition=tuple(truth.assignment)))
        ck_pred = [ck.predict(t.task_id, t.features) for t in test]
    key = "accuracy" if kind == "classification" else "rmse"
    scores = {"rmb-cle": task_mean(rmb_pred, test, key)}
    for name in ("st", "dp"):
        model = train_baseline(name, train, BaselineConfig(rounds=100))
        scores[name] = task_mean([model.predict(t.task_id, t.features) for t in test], test, key)
    return {
        "truth": truth.assignment,
        "partition": part.assignment,
        "complete": complete,
        "pseudo": pseudo,
        "exact": exact,
        "rmb_pred": rmb_pred,
        "ck_pred": ck_pred,
        "scores": scores,
        "traces": [m.train_loss for m in ptm],
    }


@pytest.fixture(scope="module")
def preset():
    return {kind: [_one_repetition(kind, rep) for rep in range(N_REPS)] for kind in KINDS}


# -- 1. cluster recovery -----------------------------------------------------


def test_c01_cluster_recovery(preset):
    rates = {k: float(np.mean([r["exact"] for r in preset[k]])) for k in KINDS}
    ok = rates["regression"] >= 0.90 and rates["classification"] >= 0.80
    verdict(1, "exact cluster recovery", ok,
            f"regression {rates['regression']:.2f} (>= 0.90), classification {rates['classification']:.2f} (>= 0.80)")
    assert ok


# -- 2. oracle equivalence ---------------------------------------------------


def test_c02_oracle_equivalence(preset):
    checked, mismatched = 0, 0
    for k in KINDS:
        for r in preset[k]:
            if r["exact"]:
                checked += 1
                mismatched += not all(np.array_equal(a, b) for a, b in zip(r["rmb_pred"], r["ck_pred"]))
    ok = mismatched == 0 and checked > 0
    verdict(2, "RMB-CLE equals Cluster-Known when recovery is exact", ok,
            f"{checked} exact repetitions, {mismatched} with differing predictions")
    assert ok


# -- 3. headline numbers and ordering ----------------------------------------


def test_c03_headline_numbers(preset):
    details, ok = [], True
    for k, key, better in (("classification", "accuracy", 1.0), ("regression", "rmse", -1.0)):
        s = {m: np.array([r["scores"][m] for r in preset[k]]) for m in ("rmb-cle", "st", "dp")}
        mean = {m: v.mean() for m, v in s.items()}
        level = mean["rmb-cle"] >= 0.85 if key == "accuracy" else mean["rmb-cle"] <= 0.35
        ok &= bool(level)
        parts = [f"{key} rmb-cle {mean['rmb-cle']:.3f} st {mean['st']:.3f} dp {mean['dp']:.3f}"]
        for a, b in (("rmb-cle", "st"), ("st", "dp")):
            pooled = np.sqrt((s[a].var(ddof=1) + s[b].var(ddof=1)) / 2)
            gap = better * (mean[a] - mean[b])
            ok &= bool(gap >= 2 * pooled)
            parts.append(f"{a}-{b} gap {gap:.3f} vs 2sd {2 * pooled:.3f}")
        details.append(", ".join(parts))
    verdict(3, "headline levels and RMB-CLE > ST > DP by 2 pooled sd", ok, "; ".join(details))
    assert ok


# -- 4. negative-transfer isolation ------------------------------------------


def _corrupt(train, keep, g):
    ys = []
    for t in train:
        y = t.targets
        if t.task_id not in keep:
            y = 1 - y if train.kind.value == "classification" else g.normal(size=len(y)) * 5
        ys.append(y)
    return MultiTaskCollection.from_arrays([t.features for t in train], ys, train.kind, n_classes=train.n_classes)


def test_c04_isolation():
    worst = 0.0
    cases = 0
    for kind in KINDS:
        for seed in range(3):
            coll, truth = synth.generate(synth.benchmark_preset(kind, seed=seed, n_test=200))
            train, test = split_at_boundary(coll)
            clean = pipeline.train(train, CONFIG, partition=truth.assignment)
            g = np.random.default_rng(seed)
            for c in range(5):
                members = set(np.flatnonzero(truth.assignment == c).tolist())
                dirty = pipeline.train(_corrupt(train, members, g), CONFIG, partition=truth.assignment)
                for i in members:
                    X = test[i].features
                    diff = np.abs(np.asarray(clean.predict(i, X), float) - np.asarray(dirty.predict(i, X), float))
                    worst = max(worst, float(diff.max()))
                    cases += 1
    ok = worst == 0.0
    verdict(4, "corrupting other clusters leaves predictions unchanged", ok, f"{cases} task checks, max change {worst}")
    assert ok


# -- 5. regression risk decomposition ----------------------------------------


def test_c05_regression_decomposition():
    worst, n = 0.0, 0
    for sigma in (0.0, 0.3):
        coll, truth = synth.generate(synth.benchmark_preset("regression", seed=11, n_test=0, noise=sigma))
        g = np.random.default_rng(5)
        for _ in range(10):
            i, j = (int(v) for v in g.integers(0, coll.n_tasks, 2))
            model = fit(coll[j].features, coll[j].targets, 100)
            rep = verify_regression_decomposition(truth.task_function(i), model.predict, sigma, n_mc=100_000,
                                                  dim=coll.n_features, rng=int(g.integers(2**31)))
            worst = max(worst, rep.z_score)
            n += 1
    ok = worst <= 3.0
    verdict(5, "R_i(F_j) = mismatch + sigma^2 within 3 Monte-Carlo SE", ok, f"{n} pairs, worst |residual|/SE {worst:.2f}")
    assert ok


# -- 6. classification excess-risk bound -------------------------------------


def test_c06_classification_bound():
    g = np.random.default_rng(6)
    violations, min_slack = 0, np.inf
    for n in range(1000):
        support, q = int(g.integers(1, 9)), int(g.integers(2, 6))
        ti = random_discrete_task(g, support, q)
        if n % 2:
            rep = verify_classification_bound(ti, task_j=random_discrete_task(g, support, q))
        else:
            rep = verify_classification_bound(ti, g.integers(0, q, support))
        violations += rep.excess > rep.disagreement
        min_slack = min(min_slack, rep.slack)
    ok = violations == 0
    verdict(6, "excess risk <= disagreement on finite toys", ok, f"1000 toys, {violations} violations, min slack {min_slack:.3g}")
    assert ok


# -- 7. clustering oracle ----------------------------------------------------


def test_c07_clustering_oracle():
    g = np.random.default_rng(7)
    bad = []
    for n in range(500):
        m = int(g.integers(2, 8))
        A = g.uniform(0, 1, (m, m))
        D = (A + A.T) / 2
        np.fill_diagonal(D, 0)
        d = upgma(D)
        merges, labels, k = naive_agglomerate(D)
        same_merges = [(mg.left, mg.right, mg.size) for mg in d.merges] == [(a, b, s) for a, b, _, s in merges]
        same_heights = np.allclose([mg.distance for mg in d.merges], [h for _, _, h, _ in merges], rtol=1e-12, atol=0)
        part = select_k(d, D) if m >= 2 else None
        if not (same_merges and same_heights and part.k == k and np.array_equal(part.assignment, labels)):
            bad.append(n)
    ok = not bad
    verdict(7, "UPGMA and select_k match the naive agglomerator", ok, f"500 matrices (m <= 7), {len(bad)} disagreements")
    assert ok


# -- 8. boosting correctness -------------------------------------------------


def _fd_gradient(loss, y, F, h=1e-6):
    G = np.empty_like(F)
    for k in range(F.shape[1]):
        up, dn = F.copy(), F.copy()
        up[:, k] += h
        dn[:, k] -= h
        # pointwise losses depend only on their own row, so one column shift probes every row
        G[:, k] = -(loss.pointwise_loss(y, up) - loss.pointwise_loss(y, dn)) / (2 * h)
    return G


def test_c08_boosting_correctness(preset):
    g = np.random.default_rng(8)
    worst_fd, split_mismatch, increases, fixtures = 0.0, 0, 0, 0
    for n in range(100):
        kind = KINDS[n % 2]
        rows, d = int(g.integers(10, 60)), int(g.integers(1, 5))
        X = g.normal(size=(rows, d))
        if kind == "regression":
            y, q = np.sin(2 * X[:, 0]) + 0.3 * g.normal(size=rows), 0
        else:
            q = int(g.integers(2, 5))
            y = g.integers(0, q, rows)
            y[:q] = np.arange(q)
        model = fit(X, y, 10, 0.1, kind, q)
        loss = make_loss(model.kind, q)
        for t in range(model.n_rounds):
            F = model.truncated(t).raw_scores(X)
            G = loss.negative_gradient(y, F)
            worst_fd = max(worst_fd, float(np.max(np.abs(_fd_gradient(loss, y, F) - G) / np.maximum(1.0, np.abs(G)))))
            for k in range(model.n_outputs):
                s, got = fit_stump(X, G[:, k]), model.stump(t, k)
                split_mismatch += (got.feature, got.threshold) != (s.feature, s.threshold)
        increases += int(np.sum(np.diff(model.train_loss) > 0))
        fixtures += 1
    for k in KINDS:
        for r in preset[k]:
            for trace in r["traces"]:
                increases += int(np.sum(np.diff(trace) > 0))
                fixtures += 1
    ok = worst_fd <= 1e-6 and split_mismatch == 0 and increases == 0
    verdict(8, "rounds fit negative gradients; loss non-increasing", ok,
            f"100 instances, worst finite-difference error {worst_fd:.2e} (<= 1e-6), {split_mismatch} split mismatches, "
            f"{increases} loss increases over {fixtures} fits")
    assert ok


# -- 9. linkage robustness ---------------------------------------------------


def test_c09_linkage_robustness(preset):
    rates = {k: float(np.mean([same_partition(r["partition"], r["complete"]) for r in preset[k]])) for k in KINDS}
    ok = all(v >= 0.90 for v in rates.values())
    verdict(9, "average and complete linkage agree", ok, ", ".join(f"{k} {v:.2f}" for k, v in rates.items()) + " (>= 0.90)")
    assert ok


# -- 10. pseudo-residual ablation --------------------------------------------


def test_c10_pseudo_residual_ablation(preset):
    parts, ok = [], True
    for k in KINDS:
        cross = float(np.mean([r["exact"] for r in preset[k]]))
        pseudo = float(np.mean([same_partition(r["pseudo"], r["truth"]) for r in preset[k]]))
        ok &= cross >= pseudo
        parts.append(f"{k} cross-task {cross:.2f} vs pseudo-residual {pseudo:.2f}")
    verdict(10, "cross-task error recovers at least as often as pseudo-residuals", ok, "; ".join(parts))
    assert ok


# -- 11. latency shape -------------------------------------------------------


def test_c11_latency_shape():
    sizes = (10, 25, 50)
    colls = {m: synth.generate(synth.benchmark_preset("regression", seed=3, n_clusters=m // 5, n_test=0))[0] for m in sizes}
    train_times = {m: [] for m in sizes}
    models = {}
    for _ in range(3):  # interleaved so machine load hits every size alike
        for m in sizes:
            t0 = time.perf_counter()
            models[m] = pipeline.train(colls[m], CONFIG)
            train_times[m].append(time.perf_counter() - t0)
    X = np.random.default_rng(0).uniform(-1, 1, (5000, 5))
    lat = {m: [] for m in sizes}
    for _ in range(60):
        for m in sizes:
            t0 = time.perf_counter()
            models[m].predict(0, X)
            lat[m].append(time.perf_counter() - t0)
    med = {m: float(np.median(v)) for m, v in lat.items()}
    spread = max(med.values()) / min(med.values()) - 1
    stumps = {models[m].stumps_per_prediction(0) for m in sizes}
    tt = {m: min(v) for m, v in train_times.items()}
    slope = float(np.polyfit(np.log(sizes), np.log([tt[m] for m in sizes]), 1)[0])
    ok = spread <= 0.20 and stumps == {CONFIG.local_rounds} and slope > 1.0
    verdict(11, "prediction cost flat in m, training superlinear", ok,
            "latency " + ", ".join(f"m={m} {med[m] * 1e3:.2f}ms" for m in sizes) + f" (spread {spread:.0%} <= 20%), "
            "train " + ", ".join(f"m={m} {tt[m]:.2f}s" for m in sizes) + f" (log-log slope {slope:.2f} > 1)")
    assert ok
