"""Multi-task boosting by task clustering and cluster-local ensembles.

Per-task stump boosters are cross-evaluated to build a task similarity
geometry; average-linkage clustering with silhouette selection groups the
tasks, and each group gets its own pooled booster.
"""

from .baselines import BaselineKind, BaselineModel, predict_baseline, train_baseline
from .boosting import BoostedModel, MtgbModel, fit, fit_mtgb, fit_stump
from .clustering import Dendrogram, Partition, cut, select_k, silhouette, upgma
from .data import (
    CsvSchema,
    DataError,
    MultiTaskCollection,
    ProblemKind,
    SplitSpec,
    TaskDataset,
    load_collection,
    save_collection,
    split,
)
from .pipeline import LocalEnsemble, RmbCleConfig, RmbCleModel, RoutingError, load_model, predict, save_model, train
from .similarity import SimilarityGeometry, SimilaritySource, build_geometry, cosine_distances, cross_task_errors, to_similarity
from .synth import GroundTruth, SyntheticSpec, benchmark_preset, generate

__version__ = "0.1.0"
