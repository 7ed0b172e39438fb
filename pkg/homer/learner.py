"""
Binary Relevance Base Learner

L2-regularized linear models (logistic loss by default, squared hinge as an
option) fit with L-BFGS to a fixed iteration budget, one model per label or
meta-label, and the per-node training loop of the hierarchy.
"""

import logging
import time
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.sparse as sp
from scipy.optimize import minimize
from scipy.special import expit

from .constants import DECISION_THRESHOLD, DEFAULT_EPOCHS, DEFAULT_L2, DEFAULT_LOSS, LOSS_CHOICES
from .dataset import (
    LabelVocabulary,
    MultiLabelDataset,
    SparseInstance,
    csr_from_rows,
    labeled_only,
)
from .exceptions import ConfigError, UntrainedModelError
from .hierarchy import LabelTree, TreeNode, meta_label_targets, node_training_set
from .parallel import parallel_map

logger = logging.getLogger(__name__)

KIND_LINEAR = 'linear'
KIND_NEGATIVE = 'constant-negative'
KIND_POSITIVE = 'constant-positive'

FeatureInput = Union[SparseInstance, Sequence[Tuple[int, float]], Tuple[np.ndarray, np.ndarray]]


@dataclass
class LearnerParams:
    """One global hyperparameter set shared by every fit"""
    l2: float = DEFAULT_L2
    epochs: int = DEFAULT_EPOCHS
    loss: str = DEFAULT_LOSS

    def validate(self) -> None:
        if self.l2 < 0:
            raise ConfigError(f'l2 must be >= 0, got {self.l2}')
        if self.epochs < 1:
            raise ConfigError(f'epochs must be >= 1, got {self.epochs}')
        if self.loss not in LOSS_CHOICES:
            raise ConfigError(f'Unknown loss {self.loss!r}; choose from {", ".join(LOSS_CHOICES)}')

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def as_sparse(x: FeatureInput) -> Tuple[np.ndarray, np.ndarray]:
    """Normalize a feature input to (sorted ids, values) arrays"""
    if isinstance(x, SparseInstance):
        return x.indices, x.values
    if isinstance(x, tuple) and len(x) == 2 and isinstance(x[0], np.ndarray):
        return np.asarray(x[0], dtype=np.int64), np.asarray(x[1], dtype=np.float64)
    inst = SparseInstance.from_pairs(x)
    return inst.indices, inst.values


class LinearModel:
    """Sparse weights and bias for one binary target"""

    def __init__(self, target: int, feature_ids: Sequence[int] = (),
                 weights: Sequence[float] = (), bias: float = 0.0,
                 kind: str = KIND_LINEAR, trained: bool = True):
        self.target = int(target)
        self.feature_ids = np.asarray(feature_ids, dtype=np.int64)
        self.weights = np.asarray(weights, dtype=np.float64)
        self.bias = float(bias)
        self.kind = kind
        self.trained = trained
        self.loss_history: List[float] = []

        if self.feature_ids.shape != self.weights.shape:
            raise ValueError('feature_ids and weights must align')
        if not (np.all(np.isfinite(self.weights)) and np.isfinite(self.bias)):
            raise ValueError(f'Model for target {target} has non-finite weights')

    @classmethod
    def untrained(cls, target: int) -> 'LinearModel':
        return cls(target, trained=False)

    @classmethod
    def constant(cls, target: int, positive: bool) -> 'LinearModel':
        return cls(target, kind=KIND_POSITIVE if positive else KIND_NEGATIVE)

    def margin(self, x: FeatureInput) -> float:
        if not self.trained:
            raise UntrainedModelError(f'Model for target {self.target} is not trained')
        if self.kind == KIND_POSITIVE:
            return np.inf
        if self.kind == KIND_NEGATIVE:
            return -np.inf
        ids, vals = as_sparse(x)
        _, mine, theirs = np.intersect1d(self.feature_ids, ids, assume_unique=True,
                                         return_indices=True)
        return float(self.weights[mine] @ vals[theirs]) + self.bias

    def dense_weights(self, num_features: int) -> np.ndarray:
        dense = np.zeros(num_features, dtype=np.float64)
        dense[self.feature_ids] = self.weights
        return dense


def score(model: LinearModel, x: FeatureInput) -> float:
    """
    Sigmoid of the margin, in [0, 1]

    Constant models score exactly 0.0 or 1.0.
    """
    m = model.margin(x)
    if model.kind == KIND_POSITIVE:
        return 1.0
    if model.kind == KIND_NEGATIVE:
        return 0.0
    return float(expit(m))


def decide(s: float) -> bool:
    return s >= DECISION_THRESHOLD


def loss_and_gradient(theta: np.ndarray, X: sp.csr_matrix, y: np.ndarray, l2: float,
                      loss: str = DEFAULT_LOSS) -> Tuple[float, np.ndarray]:
    """
    Regularized mean loss and its gradient

    Args:
        theta: Weights followed by the (unregularized) bias
        X: Design matrix (n x d)
        y: Targets in {-1, +1}
        l2: L2 penalty, objective carries l2/2 * ||w||^2
        loss: 'logistic' or 'hinge' (squared hinge)

    Returns:
        (objective value, gradient with the same shape as theta)
    """
    w = theta[:-1]
    b = theta[-1]
    n = X.shape[0]
    m = X @ w + b

    if loss == 'logistic':
        z = -y * m
        value = float(np.logaddexp(0.0, z).mean())
        coef = -y * expit(z) / n
    elif loss == 'hinge':
        slack = np.maximum(0.0, 1.0 - y * m)
        value = float((slack ** 2).mean())
        coef = -2.0 * y * slack / n
    else:
        raise ConfigError(f'Unknown loss {loss!r}')

    value += 0.5 * l2 * float(w @ w)
    grad = np.empty_like(theta)
    grad[:-1] = X.T @ coef + l2 * w
    grad[-1] = coef.sum()
    return value, grad


def fit_binary(X: sp.csr_matrix, y: np.ndarray, params: Optional[LearnerParams] = None,
               target: int = 0, record_loss: bool = False) -> LinearModel:
    """
    Fit one binary model on rows of X with boolean targets y

    Zero positives give a constant-negative model, zero negatives a
    constant-positive one.
    """
    params = params or LearnerParams()
    y = np.asarray(y, dtype=bool)
    n = X.shape[0]
    if n == 0:
        raise ValueError(f'No training instances for target {target}')

    positives = int(y.sum())
    if positives == 0:
        return LinearModel.constant(target, positive=False)
    if positives == n:
        return LinearModel.constant(target, positive=True)

    signed = np.where(y, 1.0, -1.0)
    theta0 = np.zeros(X.shape[1] + 1)
    history: List[float] = []

    def objective(theta: np.ndarray) -> Tuple[float, np.ndarray]:
        return loss_and_gradient(theta, X, signed, params.l2, params.loss)

    def record(theta: np.ndarray) -> None:
        history.append(objective(theta)[0])

    callback = None
    if record_loss:
        record(theta0)
        callback = record

    result = minimize(objective, theta0, jac=True, method='L-BFGS-B', callback=callback,
                      options={'maxiter': params.epochs})
    theta = result.x
    w = theta[:-1]
    nonzero = np.flatnonzero(w)

    model = LinearModel(target, nonzero, w[nonzero], theta[-1])
    model.loss_history = history
    logger.debug(f'Target {target}: {result.nit} iterations, objective {result.fun:.6g}')
    return model


def train_linear(positives: Sequence[FeatureInput], negatives: Sequence[FeatureInput],
                 params: Optional[LearnerParams] = None, num_features: Optional[int] = None,
                 target: int = 0) -> LinearModel:
    """
    Fit a binary model from positive and negative feature vectors

    Raises:
        ValueError: If there are no instances at all
    """
    rows = [as_sparse(x) for x in list(positives) + list(negatives)]
    if not rows:
        raise ValueError('train_linear needs at least one instance')
    if num_features is None:
        num_features = max((int(ids[-1]) + 1 for ids, _ in rows if ids.size), default=1)

    X = csr_from_rows(rows, num_features)
    y = np.zeros(len(rows), dtype=bool)
    y[:len(positives)] = True
    return fit_binary(X, y, params, target)


class NodeClassifier:
    """One LinearModel per target of a node, aligned with node.meta_labels"""

    def __init__(self, models: Sequence[LinearModel], num_features: int):
        self.models: List[LinearModel] = list(models)
        self.num_features = int(num_features)
        self._dense: Optional[np.ndarray] = None

    def __len__(self) -> int:
        return len(self.models)

    def _matrix(self) -> np.ndarray:
        if self._dense is None:
            dense = np.zeros((len(self.models), self.num_features), dtype=np.float64)
            for row, model in enumerate(self.models):
                if model.kind == KIND_LINEAR:
                    dense[row, model.feature_ids] = model.weights
            self._dense = dense
        return self._dense

    def scores(self, indices: np.ndarray, values: np.ndarray) -> np.ndarray:
        """Per-target scores in [0, 1]; feature ids must be < num_features"""
        if any(not model.trained for model in self.models):
            raise UntrainedModelError('Node classifier holds an untrained model')
        margins = self._matrix()[:, indices] @ values
        result = np.empty(len(self.models))
        for row, model in enumerate(self.models):
            if model.kind == KIND_POSITIVE:
                result[row] = 1.0
            elif model.kind == KIND_NEGATIVE:
                result[row] = 0.0
            else:
                result[row] = expit(margins[row] + model.bias)
        return result


@dataclass
class TrainingTelemetry:
    """Per-node training corpus sizes and timings"""
    node_sizes: List[int] = field(default_factory=list)
    leaf_mask: List[bool] = field(default_factory=list)
    clustering_seconds: float = 0.0
    train_seconds: float = 0.0

    def _mean(self, leaves: bool) -> float:
        sizes = [s for s, leaf in zip(self.node_sizes, self.leaf_mask) if leaf == leaves]
        return float(np.mean(sizes)) if sizes else 0.0

    @property
    def mean_dn_nonleaf(self) -> float:
        return self._mean(False)

    @property
    def mean_dn_leaf(self) -> float:
        return self._mean(True)

    @property
    def total_dn(self) -> int:
        return int(sum(self.node_sizes))

    def to_dict(self, include_timing: bool = True) -> Dict[str, Any]:
        data: Dict[str, Any] = {
            'node_sizes': list(self.node_sizes),
            'mean_Dn_nonleaf': self.mean_dn_nonleaf,
            'mean_Dn_leaf': self.mean_dn_leaf,
            'total_Dn': self.total_dn,
        }
        if include_timing:
            data['clustering_s'] = self.clustering_seconds
            data['train_s'] = self.train_seconds
        return data


class HomerModel:
    """A label tree whose every node carries a trained NodeClassifier"""

    def __init__(self, tree: LabelTree, vocab: LabelVocabulary, num_features: int,
                 learner_params: LearnerParams, method: str = 'homer',
                 telemetry: Optional[TrainingTelemetry] = None):
        self.tree = tree
        self.vocab = vocab
        self.num_features = int(num_features)
        self.learner_params = learner_params
        self.method = method
        self.telemetry = telemetry or TrainingTelemetry()

    @property
    def num_nodes(self) -> int:
        return len(self.tree)

    def check_trained(self) -> None:
        for node in self.tree.nodes:
            if node.classifier is None or len(node.classifier) != len(node.meta_labels):
                raise UntrainedModelError(f'Node {node.id} has no trained classifier')


def _node_targets(node: TreeNode, d_n: MultiLabelDataset) -> np.ndarray:
    Y = np.zeros((len(d_n), len(node.meta_labels)), dtype=bool)
    for row, inst in enumerate(d_n.instances):
        for column in meta_label_targets(node, inst):
            Y[row, column] = True
    return Y


def train_node(node: TreeNode, d_n: MultiLabelDataset, params: LearnerParams,
               num_features: int, threads: int = 1) -> NodeClassifier:
    """Fit one model per target of the node on its training set D_n"""
    if len(d_n) == 0:
        logger.warning(f'Node {node.id} has an empty training set; using constant-negative models')
        models = [LinearModel.constant(t, positive=False) for t in node.meta_label_ids]
        return NodeClassifier(models, num_features)

    X = d_n.feature_matrix()
    Y = _node_targets(node, d_n)
    targets = node.meta_label_ids

    def fit_column(column: int) -> LinearModel:
        return fit_binary(X, Y[:, column], params, target=targets[column])

    return NodeClassifier(parallel_map(fit_column, range(Y.shape[1]), threads), num_features)


def train_flat_br(train: MultiLabelDataset, params: Optional[LearnerParams] = None,
                  threads: int = 1) -> HomerModel:
    """
    Flat binary relevance: one model per label over every labeled training instance

    Represented as a single-leaf tree so persistence and prediction are shared
    with hierarchical models.
    """
    params = params or LearnerParams()
    params.validate()
    train = labeled_only(train)
    if len(train) == 0:
        raise ValueError('Training set has no labeled instances')

    started = time.perf_counter()
    tree = LabelTree.single_leaf(train.num_labels)
    root = tree.root_node
    root.classifier = train_node(root, train, params, train.num_features, threads)
    root.num_train = len(train)

    telemetry = TrainingTelemetry(node_sizes=[len(train)], leaf_mask=[True],
                                  train_seconds=time.perf_counter() - started)
    logger.info(f'Trained flat BR: {train.num_labels} models in {telemetry.train_seconds:.2f}s')
    return HomerModel(tree, train.vocab, train.num_features, params, 'br', telemetry)


def train_homer(train: MultiLabelDataset, tree: LabelTree,
                params: Optional[LearnerParams] = None, threads: int = 1,
                cache_node_data: bool = False) -> HomerModel:
    """
    Train every node of the tree on its own D_n and targets M_n

    Args:
        train: Training set the tree was built from
        tree: Label hierarchy (classifiers are attached in place)
        params: Learner hyperparameters
        threads: Worker count for per-target fits
        cache_node_data: Filter each child's D_n from its parent's kept D_n
            instead of the full training set

    Returns:
        HomerModel with telemetry on corpus sizes per node
    """
    params = params or LearnerParams()
    params.validate()
    train = labeled_only(train)
    if len(train) == 0:
        raise ValueError('Training set has no labeled instances')
    if tree.root_node.labels != frozenset(range(train.num_labels)):
        raise ConfigError('Tree was not built over this training vocabulary')

    started = time.perf_counter()
    cached: Dict[int, MultiLabelDataset] = {}
    telemetry = TrainingTelemetry(clustering_seconds=tree.build_seconds)

    # node ids are breadth-first, so a parent's D_n is ready before its children
    for node in tree.nodes:
        source = cached.get(node.parent, train) if cache_node_data else train
        d_n = node_training_set(node, source)
        if cache_node_data and not node.is_leaf:
            cached[node.id] = d_n

        node.num_train = len(d_n)
        node.classifier = train_node(node, d_n, params, train.num_features, threads)
        telemetry.node_sizes.append(len(d_n))
        telemetry.leaf_mask.append(node.is_leaf)
        logger.debug(f'Node {node.id}: |D_n|={len(d_n)}, |M_n|={len(node.meta_labels)}')

    telemetry.train_seconds = time.perf_counter() - started + tree.build_seconds
    logger.info(
        f'Trained HOMER: {len(tree)} nodes in {telemetry.train_seconds:.2f}s '
        f'(clustering {tree.build_seconds:.2f}s), mean |D_n| non-leaf '
        f'{telemetry.mean_dn_nonleaf:.1f}, leaf {telemetry.mean_dn_leaf:.1f}'
    )
    return HomerModel(tree, train.vocab, train.num_features, params, 'homer', telemetry)
