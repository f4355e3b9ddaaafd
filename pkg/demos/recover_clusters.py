"""Recover a hidden task grouping from cross-task errors.

Twenty-five regression tasks are drawn in five groups of five. Each task
gets its own boosted model, every model is scored on every other task's
data, and the resulting similarity profiles are clustered. The recovered
grouping is then used to pool data inside each cluster.

Run: python3 demos/recover_clusters.py
"""

import numpy as np

from rmbcle import pipeline, synth
from rmbcle.baselines import BaselineConfig, train_baseline
from rmbcle.clustering import relabel
from rmbcle.data import split_at_boundary

# %% data: 300 training and 1000 test rows per task
coll, truth = synth.generate(synth.benchmark_preset("regression", seed=7))
train, test = split_at_boundary(coll)
print(f"{train.n_tasks} tasks, {train.n_features} features, true groups {truth.assignment.tolist()}")

# %% fit the pipeline; geometry and dendrogram are kept on the model
model = pipeline.train(train)
E = model.geometry.errors
print("\ncross-task MSE, first 7 tasks (row = data, column = model):")
print(np.array2string(E[:7, :7], precision=2, suppress_small=True))

D = model.geometry.distances
same = truth.assignment[:, None] == truth.assignment[None, :]
off = ~np.eye(len(D), dtype=bool)
print(f"\nmean cosine distance within true groups {D[same & off].mean():.3f}, across {D[~same].mean():.3f}")
print(f"k* = {model.n_clusters}, mean silhouette {model.mean_silhouette:.3f}")
print("recovered:", model.assignment.tolist())
print("exact recovery:", np.array_equal(relabel(model.assignment), relabel(truth.assignment)))


# %% compare with one model per task and one pooled model
def rmse(m):
    return np.mean([np.sqrt(np.mean((m.predict(t.task_id, t.features) - t.targets) ** 2)) for t in test])


print(f"\ntest RMSE  rmb-cle {rmse(model):.3f}", end="")
for name in ("st", "dp"):
    print(f"  {name} {rmse(train_baseline(name, train, BaselineConfig(rounds=100))):.3f}", end="")
print()
