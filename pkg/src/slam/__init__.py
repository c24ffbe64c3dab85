"""Spatial labeling similarity: the SLAM discrepancy and reference benchmark metrics."""

from .core import EvaluationConfig, Labeling, SlamError, SpatialDataset, load_dataset, load_labeling
from .discrepancy import mmd_discrepancy, slam_score, sliced_w2, wasserstein_1d_sq
from .graph import build_mutual_knn, knn_lists
from .harness import generate_case, q_coefficient
from .matching import match_labels

__version__ = "0.1.0"

__all__ = [
    "EvaluationConfig",
    "Labeling",
    "SlamError",
    "SpatialDataset",
    "build_mutual_knn",
    "generate_case",
    "knn_lists",
    "load_dataset",
    "load_labeling",
    "match_labels",
    "mmd_discrepancy",
    "q_coefficient",
    "slam_score",
    "sliced_w2",
    "wasserstein_1d_sq",
]
