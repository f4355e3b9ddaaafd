"""Benchmark harness: grid search, repeated runs, metrics and reports."""

from .config import ExperimentConfig, load_config
from .metrics import metrics
from .reports import rank_table, stability_report
from .runner import RunReport, run_benchmark
from .search import grid_search
