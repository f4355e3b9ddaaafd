"""Clusters isolate tasks from unrelated data.

Every training label outside the first cluster is replaced by noise. A
single pooled model (DP) absorbs the damage; RMB-CLE with the same
partition predicts the first cluster's tasks exactly as before.

Run: python3 demos/negative_transfer.py
"""

import numpy as np

from rmbcle import pipeline, synth
from rmbcle.baselines import BaselineConfig, train_baseline
from rmbcle.data import MultiTaskCollection, split_at_boundary

coll, truth = synth.generate(synth.benchmark_preset("regression", seed=3, n_test=500))
train, test = split_at_boundary(coll)
keep = np.flatnonzero(truth.assignment == 0)

g = np.random.default_rng(0)
ys = [t.targets if t.task_id in keep else 5 * g.normal(size=t.n_samples) for t in train]
noisy = MultiTaskCollection.from_arrays([t.features for t in train], ys, "regression")


def rmse(m, tasks):
    return np.mean([np.sqrt(np.mean((m.predict(i, test[i].features) - test[i].targets) ** 2)) for i in tasks])


for label, data in (("clean", train), ("corrupted", noisy)):
    rmb = pipeline.train(data, partition=truth.assignment)
    dp = train_baseline("dp", data, BaselineConfig(rounds=100))
    print(f"{label:>9} labels: cluster-0 RMSE  rmb-cle {rmse(rmb, keep):.4f}  dp {rmse(dp, keep):.4f}")
