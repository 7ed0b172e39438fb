"""
Model Persistence

JSON model files: a header (format, version, method, params, vocabulary and
its hash, num_features), training telemetry without wall-clock timings, and
the tree with each node's sparse weight lists. Floats are written in their
shortest round-trip form, so save/load is bit-exact and repeated training
with the same seed yields byte-identical files.
"""

import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Union

from .constants import MODEL_FORMAT, MODEL_FORMAT_VERSION
from .dataset import LabelVocabulary, MultiLabelDataset, vocab_hash
from .exceptions import ModelDataMismatchError, ModelFormatError, ModelVersionError
from .hierarchy import HierarchyParams, LabelTree, TreeNode
from .learner import (
    KIND_LINEAR,
    KIND_NEGATIVE,
    KIND_POSITIVE,
    HomerModel,
    LearnerParams,
    LinearModel,
    NodeClassifier,
    TrainingTelemetry,
)

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

MODEL_KINDS = (KIND_LINEAR, KIND_NEGATIVE, KIND_POSITIVE)


def _model_to_dict(model: LinearModel) -> Dict[str, Any]:
    return {
        'target': model.target,
        'kind': model.kind,
        'bias': model.bias,
        'weights': [[int(fid), float(w)] for fid, w in zip(model.feature_ids, model.weights)],
    }


def _model_from_dict(data: Dict[str, Any]) -> LinearModel:
    if data['kind'] not in MODEL_KINDS:
        raise ModelFormatError(f'Unknown model kind: {data["kind"]!r}')
    weights = data.get('weights', [])
    return LinearModel(
        target=data['target'],
        feature_ids=[int(fid) for fid, _ in weights],
        weights=[float(w) for _, w in weights],
        bias=float(data.get('bias', 0.0)),
        kind=data['kind'],
    )


def model_to_dict(model: HomerModel) -> Dict[str, Any]:
    """Serializable view of a trained model"""
    model.check_trained()
    tree = model.tree
    return {
        'format': MODEL_FORMAT,
        'version': MODEL_FORMAT_VERSION,
        'method': model.method,
        'params': {
            'hierarchy': tree.params.to_dict() if tree.params else None,
            'learner': model.learner_params.to_dict(),
        },
        'vocab': list(model.vocab.labels),
        'vocab_hash': vocab_hash(model.vocab),
        'num_features': model.num_features,
        'telemetry': model.telemetry.to_dict(include_timing=False),
        'tree': {
            'root': tree.root,
            'nodes': [
                {
                    'id': node.id,
                    'parent': node.parent,
                    'depth': node.depth,
                    'labels': sorted(node.labels),
                    'children': list(node.children),
                    'num_train': node.num_train,
                    'models': [_model_to_dict(m) for m in node.classifier.models],
                }
                for node in tree.nodes
            ],
        },
    }


def save_model(model: HomerModel, path: PathLike) -> None:
    """Write a trained model as JSON"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', encoding='utf-8', newline='\n') as f:
        json.dump(model_to_dict(model), f, separators=(',', ':'))
        f.write('\n')
    logger.info(f'Model saved to {path}')


def _build_tree(tree_data: Dict[str, Any], params: Dict[str, Any], num_features: int) -> LabelTree:
    nodes: List[TreeNode] = []
    for position, entry in enumerate(tree_data['nodes']):
        if entry['id'] != position:
            raise ModelFormatError(f'Node ids must be consecutive, found {entry["id"]} at {position}')
        node = TreeNode(entry['id'], entry['labels'], depth=entry['depth'], parent=entry['parent'])
        node.children = list(entry['children'])
        node.num_train = entry.get('num_train')
        nodes.append(node)

    for node, entry in zip(nodes, tree_data['nodes']):
        if not node.is_leaf:
            node.meta_labels = [nodes[c].labels for c in node.children]
        models = [_model_from_dict(m) for m in entry['models']]
        if [m.target for m in models] != node.meta_label_ids:
            raise ModelFormatError(f'Node {node.id} models do not match its targets')
        node.classifier = NodeClassifier(models, num_features)

    hierarchy = params.get('hierarchy')
    return LabelTree(nodes, HierarchyParams(**hierarchy) if hierarchy else None)


def model_from_dict(data: Dict[str, Any]) -> HomerModel:
    """
    Rebuild a model from its JSON form

    Raises:
        ModelVersionError: If the version field is not supported
        ModelFormatError: If the content is not a valid model
    """
    if not isinstance(data, dict) or data.get('format') != MODEL_FORMAT:
        raise ModelFormatError('Not a homer model file')
    if data.get('version') != MODEL_FORMAT_VERSION:
        raise ModelVersionError(
            f'Unsupported model version {data.get("version")!r} '
            f'(this build reads version {MODEL_FORMAT_VERSION})'
        )

    try:
        vocab = LabelVocabulary(data['vocab'])
        if vocab_hash(vocab) != data['vocab_hash']:
            raise ModelFormatError('Stored vocab_hash does not match the stored vocabulary')

        num_features = int(data['num_features'])
        tree = _build_tree(data['tree'], data['params'], num_features)
        tree.check_invariants(len(vocab))

        telemetry_data = data.get('telemetry') or {}
        telemetry = TrainingTelemetry(
            node_sizes=list(telemetry_data.get('node_sizes', [])),
            leaf_mask=[node.is_leaf for node in tree.nodes],
        )
        learner_params = LearnerParams(**data['params']['learner'])
    except ModelFormatError:
        raise
    except (KeyError, TypeError, ValueError, IndexError) as e:
        raise ModelFormatError(f'Malformed model content: {e}') from e

    return HomerModel(tree, vocab, num_features, learner_params, data['method'], telemetry)


def load_model(path: PathLike) -> HomerModel:
    """Read a model file written by save_model"""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f'Model file not found: {path}')

    try:
        with open(path, 'r', encoding='utf-8') as f:
            data = json.load(f)
    except json.JSONDecodeError as e:
        raise ModelFormatError(f'{path}: invalid JSON: {e}') from e

    model = model_from_dict(data)
    logger.info(f'Loaded {model.method} model from {path}: {model.num_nodes} nodes, '
                f'{len(model.vocab)} labels, {model.num_features} features')
    return model


def check_compatibility(model: HomerModel, ds: MultiLabelDataset) -> None:
    """
    Make sure a dataset speaks the model's label vocabulary

    Extra feature ids are only reported; prediction ignores them.

    Raises:
        ModelDataMismatchError: If the vocabulary hashes differ
    """
    expected = vocab_hash(model.vocab)
    found = vocab_hash(ds.vocab)
    if expected != found:
        raise ModelDataMismatchError(
            f'Label vocabulary mismatch: model {expected[:12]} ({len(model.vocab)} labels), '
            f'data {found[:12]} ({len(ds.vocab)} labels)'
        )
    if ds.num_features > model.num_features:
        logger.warning(
            f'Data has {ds.num_features} features, model was trained on {model.num_features}; '
            f'extra feature ids are ignored'
        )
