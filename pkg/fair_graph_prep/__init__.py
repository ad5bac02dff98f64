"""
Fair graph data preparation.

Prepares graph-structured credit data for fair downstream learning with
three kinds of bias mitigation (sparsification, feature reassignment and
synthetic augmentation) and measures the fairness of a small GCN trained on
each prepared variant.
"""

from .augmenter import augment, compute_na
from .cli_harness import ExperimentConfig, emit_report, run_experiment
from .fairness_metrics import evaluate
from .feature_editor import compute_nc, compute_nc2
from .graph_core import (
    BalanceCounts,
    CreditGraph,
    DatasetSchema,
    build_knn_edges,
    group_counts,
    induced_subgraph,
    ingest_dataset,
)
from .samplers import SamplingSpec, sparsify

__version__ = "1.0.0"

__all__ = [
    "BalanceCounts",
    "CreditGraph",
    "DatasetSchema",
    "ExperimentConfig",
    "SamplingSpec",
    "augment",
    "build_knn_edges",
    "compute_na",
    "compute_nc",
    "compute_nc2",
    "emit_report",
    "evaluate",
    "group_counts",
    "induced_subgraph",
    "ingest_dataset",
    "run_experiment",
    "sparsify",
]
