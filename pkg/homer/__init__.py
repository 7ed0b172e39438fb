"""
HOMER - hierarchy of multi-label classifiers

Balanced k-means label clustering, a recursive label tree, per-node binary
relevance learners, and top-down bipartition / ranking inference.
"""

from .clustering import Clustering, LabelVector, balanced_kmeans, distance, plain_kmeans
from .dataset import (
    LabelVocabulary,
    MultiLabelDataset,
    SparseInstance,
    compute_stats,
    filter_by_labels,
    load_dataset,
    save_dataset,
)
from .evaluation import bucketed_report, confusion, macro_f1, micro_f1
from .exceptions import (
    ConfigError,
    DatasetFormatError,
    DimensionMismatchError,
    HomerError,
    ModelDataMismatchError,
    ModelFormatError,
    ModelVersionError,
    UntrainedModelError,
)
from .hierarchy import LabelTree, TreeNode, build_hierarchy
from .inference import predict_bipartition, predict_ranking, traversal_stats
from .learner import HomerModel, LearnerParams, score, train_flat_br, train_homer
from .persistence import load_model, save_model

__version__ = '1.0.0'
