"""
Label Hierarchy

Recursive partitioning of the label set into a tree: each node holds its
label set L_n and the targets M_n its classifier learns (one meta-label per
child for internal nodes, the labels themselves for leaves).
"""

import logging
import time
from collections import deque
from dataclasses import asdict, dataclass
from typing import Any, Dict, FrozenSet, Iterable, List, Optional, Sequence, Set, Union

import numpy as np

from .clustering import Clusterer, LabelVector, build_label_vectors, make_clusterer
from .constants import (
    CLUSTERER_CHOICES,
    DEFAULT_CLUSTERER,
    DEFAULT_ITERATIONS,
    DEFAULT_K,
    DEFAULT_NMAX,
    DEFAULT_SEED,
)
from .dataset import LabelVocabulary, MultiLabelDataset, SparseInstance, filter_by_labels
from .exceptions import ConfigError

logger = logging.getLogger(__name__)


@dataclass
class HierarchyParams:
    """Parameters controlling tree construction"""
    k: int = DEFAULT_K
    nmax: int = DEFAULT_NMAX
    iterations: int = DEFAULT_ITERATIONS
    seed: int = DEFAULT_SEED
    clusterer: str = DEFAULT_CLUSTERER

    def validate(self) -> None:
        if self.k < 2:
            raise ConfigError(f'k must be >= 2, got {self.k}')
        if self.nmax < 1:
            raise ConfigError(f'nmax must be >= 1, got {self.nmax}')
        if self.iterations < 1:
            raise ConfigError(f'iterations must be >= 1, got {self.iterations}')
        if self.clusterer not in CLUSTERER_CHOICES:
            raise ConfigError(f'Unknown clusterer: {self.clusterer}')

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


class TreeNode:
    """One node of the label hierarchy"""

    def __init__(self, node_id: int, labels: Iterable[int], depth: int = 0,
                 parent: Optional[int] = None):
        self.id = node_id
        self.labels: FrozenSet[int] = frozenset(labels)
        self.depth = depth
        self.parent = parent
        self.children: List[int] = []
        # label set covered by each target; singletons at leaves
        self.meta_labels: List[FrozenSet[int]] = [frozenset([l]) for l in sorted(self.labels)]
        self.classifier = None
        self.num_train: Optional[int] = None

    @property
    def is_leaf(self) -> bool:
        return not self.children

    @property
    def meta_label_ids(self) -> List[int]:
        """Child node ids for internal nodes, label ids for leaves"""
        if self.is_leaf:
            return sorted(self.labels)
        return list(self.children)

    def __repr__(self) -> str:
        kind = 'leaf' if self.is_leaf else f'{len(self.children)} children'
        return f'TreeNode(id={self.id}, |L_n|={len(self.labels)}, {kind})'


class LabelTree:
    """Id-indexed store of TreeNodes rooted at node 0"""

    def __init__(self, nodes: Sequence[TreeNode], params: Optional[HierarchyParams] = None):
        self.nodes: List[TreeNode] = list(nodes)
        self.root = 0
        self.params = params
        self.build_seconds = 0.0

    @classmethod
    def single_leaf(cls, num_labels: int,
                    params: Optional[HierarchyParams] = None) -> 'LabelTree':
        """Degenerate tree whose root is a leaf holding every label"""
        return cls([TreeNode(0, range(num_labels))], params)

    def __len__(self) -> int:
        return len(self.nodes)

    def __getitem__(self, node_id: int) -> TreeNode:
        return self.nodes[node_id]

    @property
    def root_node(self) -> TreeNode:
        return self.nodes[self.root]

    @property
    def depth(self) -> int:
        return max(node.depth for node in self.nodes)

    def leaves(self) -> List[TreeNode]:
        return [node for node in self.nodes if node.is_leaf]

    def internal_nodes(self) -> List[TreeNode]:
        return [node for node in self.nodes if not node.is_leaf]

    def path_to(self, node_id: int) -> List[int]:
        """Node ids from the root down to node_id"""
        path = [node_id]
        while self.nodes[path[-1]].parent is not None:
            path.append(self.nodes[path[-1]].parent)
        return path[::-1]

    def leaf_of(self) -> Dict[int, int]:
        """Map every label id to the leaf holding it"""
        return {label_id: leaf.id for leaf in self.leaves() for label_id in leaf.labels}

    def check_invariants(self, num_labels: int, nmax: Optional[int] = None) -> None:
        """Raise ValueError if the tree is not a valid label hierarchy"""
        if self.root_node.labels != frozenset(range(num_labels)):
            raise ValueError('Root must hold every label')

        seen: Set[int] = set()
        for leaf in self.leaves():
            if leaf.labels & seen:
                raise ValueError(f'Leaf {leaf.id} shares labels with another leaf')
            seen |= leaf.labels
            if nmax is not None and len(leaf.labels) > nmax:
                raise ValueError(f'Leaf {leaf.id} has {len(leaf.labels)} > nmax labels')
            if leaf.meta_labels != [frozenset([l]) for l in sorted(leaf.labels)]:
                raise ValueError(f'Leaf {leaf.id} targets differ from its labels')
        if seen != set(range(num_labels)):
            raise ValueError('Leaves do not cover the label set')

        for node in self.internal_nodes():
            child_sets = [self.nodes[c].labels for c in node.children]
            if len(child_sets) < 2 or any(not s for s in child_sets):
                raise ValueError(f'Node {node.id} must have >= 2 non-empty children')
            if sum(len(s) for s in child_sets) != len(node.labels) \
                    or frozenset().union(*child_sets) != node.labels:
                raise ValueError(f'Node {node.id} children do not partition its labels')
            if node.meta_labels != child_sets:
                raise ValueError(f'Node {node.id} meta-labels differ from its children')
            if nmax is not None and len(node.labels) <= nmax:
                raise ValueError(f'Node {node.id} was split with <= nmax labels')

    def to_dict(self, vocab: Optional[LabelVocabulary] = None) -> Dict[str, Any]:
        """JSON-friendly view used by inspect-tree"""
        def name(label_id: int) -> Union[str, int]:
            return vocab.name_of(label_id) if vocab is not None else label_id

        return {
            'root': self.root,
            'num_nodes': len(self.nodes),
            'num_leaves': len(self.leaves()),
            'depth': self.depth,
            'params': self.params.to_dict() if self.params else None,
            'nodes': [
                {
                    'id': node.id,
                    'depth': node.depth,
                    'labels': [name(l) for l in sorted(node.labels)],
                    'children': list(node.children),
                    'num_train': node.num_train,
                }
                for node in self.nodes
            ],
        }


def _node_seed(seed: int, node_id: int) -> int:
    return int(np.random.default_rng([seed, node_id]).integers(2 ** 31 - 1))


def _split_labels(labels: List[int], k: int, vectors: Dict[int, LabelVector],
                  clusterer: Clusterer, seed: int) -> List[List[int]]:
    k_eff = min(k, len(labels))
    occurring = [l for l in labels if len(vectors[l]) > 0]
    unseen = [l for l in labels if len(vectors[l]) == 0]

    if len(occurring) >= k_eff:
        clustering = clusterer.cluster([vectors[l] for l in occurring], k_eff, seed)
        groups = [list(cluster) for cluster in clustering.assignments]
        start = 0
        logger.debug(
            f'Clustered {len(occurring)} labels into sizes {clustering.sizes()} '
            f'(evictions {clustering.total_evictions}, longest cascade '
            f'{clustering.longest_cascade})'
        )
    else:
        groups = [[l] for l in occurring] + [[] for _ in range(k_eff - len(occurring))]
        start = len(occurring)

    if unseen:
        logger.warning(f'Assigning {len(unseen)} labels without training occurrences round-robin')
        for offset, label_id in enumerate(unseen):
            groups[(start + offset) % k_eff].append(label_id)

    return [sorted(group) for group in groups]


def build_hierarchy(train: MultiLabelDataset, k: int = DEFAULT_K, nmax: int = DEFAULT_NMAX,
                    clusterer: Union[str, Clusterer] = DEFAULT_CLUSTERER,
                    iterations: int = DEFAULT_ITERATIONS,
                    seed: int = DEFAULT_SEED) -> LabelTree:
    """
    Build the label tree by recursive clustering

    A node with more than nmax labels is split into k children (k is clamped
    to |L_n| when a node has no more labels than that); the recursion stops
    at nodes with at most nmax labels.

    Args:
        train: Training set the label vectors are built from
        k: Children per split
        nmax: Maximum labels per leaf
        clusterer: 'balanced-kmeans', 'kmeans' or a Clusterer instance
        iterations: Clustering passes
        seed: Base seed; each node's clustering derives its own

    Returns:
        LabelTree satisfying the partition and nmax invariants
    """
    kind = clusterer.kind if isinstance(clusterer, Clusterer) else clusterer
    params = HierarchyParams(k=k, nmax=nmax, iterations=iterations, seed=seed, clusterer=kind)
    params.validate()
    if train.num_labels < 1:
        raise ConfigError('Label set is empty')
    if not isinstance(clusterer, Clusterer):
        clusterer = make_clusterer(clusterer, iterations)

    started = time.perf_counter()
    vectors = {v.label_id: v for v in build_label_vectors(train)}

    nodes = [TreeNode(0, range(train.num_labels))]
    pending = deque([0])
    while pending:
        node = nodes[pending.popleft()]
        if len(node.labels) <= nmax:
            continue

        groups = _split_labels(sorted(node.labels), k, vectors, clusterer,
                               _node_seed(seed, node.id))
        for group in groups:
            child = TreeNode(len(nodes), group, depth=node.depth + 1, parent=node.id)
            nodes.append(child)
            node.children.append(child.id)
            pending.append(child.id)
        node.meta_labels = [nodes[c].labels for c in node.children]

    tree = LabelTree(nodes, params)
    tree.check_invariants(train.num_labels, nmax)
    tree.build_seconds = time.perf_counter() - started

    logger.info(
        f'Built label tree: {len(tree)} nodes, {len(tree.leaves())} leaves, '
        f'depth {tree.depth} in {tree.build_seconds:.2f}s'
    )
    return tree


def node_training_set(node: TreeNode, train: MultiLabelDataset) -> MultiLabelDataset:
    """D_n: the training instances carrying at least one label of L_n"""
    return filter_by_labels(train, node.labels)


def meta_label_targets(node: TreeNode, instance: SparseInstance) -> Set[int]:
    """Indices into node.meta_labels that are positive for the instance"""
    return {i for i, covered in enumerate(node.meta_labels) if covered & instance.labels}
