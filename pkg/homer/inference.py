"""
Hierarchical Prediction

Top-down traversal of a trained label tree: bipartition mode follows every
child whose meta-label is decided positive; ranking mode propagates scores
multiplicatively and can prune paths whose score falls to parent score / k.
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Set, Tuple

import numpy as np

from .constants import DECISION_THRESHOLD, DEFAULT_PRUNE
from .dataset import MultiLabelDataset
from .learner import FeatureInput, HomerModel, as_sparse
from .parallel import parallel_map

logger = logging.getLogger(__name__)


@dataclass
class Prediction:
    """Result of one traversal"""
    labels: Set[int] = field(default_factory=set)
    ranking: List[Tuple[int, float]] = field(default_factory=list)
    nodes_visited: int = 0
    paths_taken: int = 0
    unknown_features: int = 0

    def top(self, r: int) -> List[Tuple[int, float]]:
        return self.ranking[:r]


def _known_features(model: HomerModel, x: FeatureInput) -> Tuple[np.ndarray, np.ndarray, int]:
    indices, values = as_sparse(x)
    keep = indices < model.num_features
    return indices[keep], values[keep], int(indices.size - keep.sum())


def predict_bipartition(model: HomerModel, x: FeatureInput) -> Prediction:
    """
    Predict a label set by recursive descent

    Starting at the root, every child whose meta-label score is >= 0.5 is
    visited; at the leaves the positively decided labels are emitted. The
    result may be empty. Feature ids beyond the model's feature space are
    ignored and counted.
    """
    model.check_trained()
    indices, values, unknown = _known_features(model, x)
    tree = model.tree
    prediction = Prediction(unknown_features=unknown)

    pending = [tree.root]
    while pending:
        node = tree.nodes[pending.pop()]
        scores = node.classifier.scores(indices, values)
        prediction.nodes_visited += 1

        if node.is_leaf:
            prediction.paths_taken += 1
            prediction.labels.update(
                label_id for label_id, s in zip(node.meta_label_ids, scores)
                if s >= DECISION_THRESHOLD
            )
            continue

        # reversed so children are visited in meta-label order
        for child, s in reversed(list(zip(node.children, scores))):
            if s >= DECISION_THRESHOLD:
                pending.append(child)

    return prediction


def predict_ranking(model: HomerModel, x: FeatureInput, prune: bool = DEFAULT_PRUNE,
                    omit_zeros: bool = False) -> Prediction:
    """
    Rank every label by its propagated score

    A child's score is its parent's propagated score times its meta-label
    score (the root receives 1.0); a label's score is its leaf's propagated
    score times the leaf's label score. With prune on, a child whose
    propagated score is <= parent score / (number of children) is not
    expanded and its labels score 0.

    Args:
        model: Trained model
        x: Instance features
        prune: Apply the parent-score / k pruning rule
        omit_zeros: Drop zero-scored labels from the ranking

    Returns:
        Prediction whose ranking is sorted by score descending, then label id
    """
    model.check_trained()
    indices, values, unknown = _known_features(model, x)
    tree = model.tree
    prediction = Prediction(unknown_features=unknown)
    final = np.zeros(len(model.vocab))

    pending = [(tree.root, 1.0)]
    while pending:
        node_id, incoming = pending.pop()
        node = tree.nodes[node_id]
        scores = node.classifier.scores(indices, values)
        prediction.nodes_visited += 1

        if node.is_leaf:
            prediction.paths_taken += 1
            for label_id, s in zip(node.meta_label_ids, scores):
                final[label_id] = incoming * s
            continue

        floor = incoming / len(node.children)
        for child, s in reversed(list(zip(node.children, scores))):
            propagated = incoming * s
            if prune and propagated <= floor:
                continue
            pending.append((child, propagated))

    order = sorted(range(len(final)), key=lambda label_id: (-final[label_id], label_id))
    prediction.ranking = [
        (label_id, float(final[label_id])) for label_id in order
        if not (omit_zeros and final[label_id] == 0.0)
    ]
    return prediction


def predict_dataset(model: HomerModel, ds: MultiLabelDataset, mode: str = 'bipartition',
                    prune: bool = DEFAULT_PRUNE, omit_zeros: bool = False,
                    threads: Optional[int] = 1) -> List[Prediction]:
    """Predict every instance of a dataset, keeping input order"""
    if mode == 'bipartition':
        def run(inst):
            return predict_bipartition(model, inst)
    elif mode == 'ranking':
        def run(inst):
            return predict_ranking(model, inst, prune=prune, omit_zeros=omit_zeros)
    else:
        raise ValueError(f'Unknown prediction mode: {mode}')

    predictions = parallel_map(run, ds.instances, threads)
    unknown = sum(p.unknown_features for p in predictions)
    if unknown:
        logger.warning(f'Ignored {unknown} feature occurrences outside the model feature space')
    return predictions


@dataclass
class TraversalStats:
    """Nodes visited and leaves reached per instance"""
    num_instances: int
    total_nodes: int
    mean_nodes_visited: float
    max_nodes_visited: int
    mean_paths_taken: float
    max_paths_taken: int
    unknown_features: int = 0

    def to_dict(self) -> Dict[str, Any]:
        return dict(self.__dict__)


def summarize_traversal(model: HomerModel, predictions: List[Prediction]) -> TraversalStats:
    visited = [p.nodes_visited for p in predictions] or [0]
    paths = [p.paths_taken for p in predictions] or [0]
    return TraversalStats(
        num_instances=len(predictions),
        total_nodes=model.num_nodes,
        mean_nodes_visited=float(np.mean(visited)),
        max_nodes_visited=int(max(visited)),
        mean_paths_taken=float(np.mean(paths)),
        max_paths_taken=int(max(paths)),
        unknown_features=sum(p.unknown_features for p in predictions),
    )


def traversal_stats(model: HomerModel, test: MultiLabelDataset,
                    threads: Optional[int] = 1) -> TraversalStats:
    """Bipartition-mode traversal telemetry over a test set"""
    return summarize_traversal(model, predict_dataset(model, test, threads=threads))
