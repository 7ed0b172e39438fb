"""Tests for hierarchical bipartition and ranking prediction"""

import numpy as np
import pytest

from homer.exceptions import UntrainedModelError
from homer.hierarchy import LabelTree, TreeNode, build_hierarchy
from homer.inference import (
    predict_bipartition,
    predict_dataset,
    predict_ranking,
    summarize_traversal,
    traversal_stats,
)
from homer.learner import HomerModel, LearnerParams, LinearModel, NodeClassifier, train_homer
from homer.synthetic import make_power_law_corpus

NUM_FEATURES = 12


def attach_random_models(tree, rng, num_features=NUM_FEATURES):
    for node in tree.nodes:
        models = []
        for target in node.meta_label_ids:
            draw = rng.random()
            if draw < 0.1:
                models.append(LinearModel.constant(target, positive=True))
            elif draw < 0.2:
                models.append(LinearModel.constant(target, positive=False))
            else:
                models.append(LinearModel(target, np.arange(num_features),
                                          rng.normal(scale=2.0, size=num_features),
                                          bias=float(rng.normal())))
        node.classifier = NodeClassifier(models, num_features)


def random_model(seed):
    rng = np.random.default_rng(seed)
    num_labels = int(rng.integers(2, 30))
    ds = make_power_law_corpus(num_labels=num_labels, num_instances=80,
                               features_per_label=1, noise_features=0, seed=seed)
    tree = build_hierarchy(ds, k=int(rng.integers(2, 5)), nmax=int(rng.integers(1, 6)), seed=seed)
    attach_random_models(tree, rng)
    return HomerModel(tree, ds.vocab, NUM_FEATURES, LearnerParams()), rng


def random_instance(rng):
    ids = np.flatnonzero(rng.random(NUM_FEATURES) < 0.4)
    return [(int(i), float(rng.normal())) for i in ids]


def node_scores(model, x):
    indices = np.array([i for i, _ in x], dtype=np.int64)
    values = np.array([v for _, v in x], dtype=np.float64)
    return {node.id: node.classifier.scores(indices, values) for node in model.tree.nodes}


def oracle_label_scores(model, x, prune):
    """Walk every root-to-leaf path, multiplying scores and applying the pruning floor"""
    tree = model.tree
    scores = node_scores(model, x)
    result = {}
    for label_id, leaf_id in tree.leaf_of().items():
        incoming = 1.0
        path = tree.path_to(leaf_id)
        for parent_id, child_id in zip(path, path[1:]):
            parent = tree.nodes[parent_id]
            propagated = incoming * scores[parent_id][parent.children.index(child_id)]
            if prune and propagated <= incoming / len(parent.children):
                incoming = 0.0
                break
            incoming = propagated
        leaf = tree.nodes[leaf_id]
        result[label_id] = incoming * scores[leaf_id][leaf.meta_label_ids.index(label_id)]
    return result


def oracle_label_set(model, x):
    tree = model.tree
    scores = node_scores(model, x)
    labels = set()
    for label_id, leaf_id in tree.leaf_of().items():
        path = tree.path_to(leaf_id)
        edges_ok = all(
            scores[p][tree.nodes[p].children.index(c)] >= 0.5 for p, c in zip(path, path[1:])
        )
        leaf = tree.nodes[leaf_id]
        if edges_ok and scores[leaf_id][leaf.meta_label_ids.index(label_id)] >= 0.5:
            labels.add(label_id)
    return labels


@pytest.mark.parametrize('prune', [False, True])
def test_ranking_matches_path_products_on_random_trees(prune):
    for seed in range(50):
        model, rng = random_model(seed)
        for _ in range(4):
            x = random_instance(rng)
            expected = oracle_label_scores(model, x, prune)
            ranking = predict_ranking(model, x, prune=prune).ranking

            assert sorted(l for l, _ in ranking) == sorted(expected)
            for label_id, s in ranking:
                assert s == pytest.approx(expected[label_id], abs=1e-12)
            keys = [(-s, l) for l, s in ranking]
            assert keys == sorted(keys)


def test_bipartition_matches_the_path_rule_on_random_trees():
    for seed in range(50):
        model, rng = random_model(seed)
        for _ in range(4):
            x = random_instance(rng)
            prediction = predict_bipartition(model, x)
            assert prediction.labels == oracle_label_set(model, x)
            assert 1 <= prediction.nodes_visited <= model.num_nodes


def test_unpruned_ranking_scores_are_within_the_unit_interval():
    model, rng = random_model(3)
    ranking = predict_ranking(model, random_instance(rng), prune=False).ranking
    assert all(0.0 <= s <= 1.0 for _, s in ranking)
    assert len(ranking) == len(model.vocab)


def test_single_leaf_modes_agree():
    model, rng = random_model(11)
    tree = LabelTree.single_leaf(len(model.vocab))
    attach_random_models(tree, rng)
    flat = HomerModel(tree, model.vocab, NUM_FEATURES, LearnerParams(), 'br')

    for _ in range(20):
        x = random_instance(rng)
        ranked = {l for l, s in predict_ranking(flat, x).ranking if s >= 0.5}
        assert predict_bipartition(flat, x).labels == ranked


def constant_tree_model(root_positive):
    ds = make_power_law_corpus(num_labels=12, num_instances=100, noise_features=0, seed=2)
    tree = build_hierarchy(ds, k=2, nmax=3, seed=0)
    for node in tree.nodes:
        positive = root_positive or node.id != tree.root
        node.classifier = NodeClassifier(
            [LinearModel.constant(t, positive=positive) for t in node.meta_label_ids],
            ds.num_features,
        )
    return HomerModel(tree, ds.vocab, ds.num_features, LearnerParams())


def test_all_positive_models_visit_every_node():
    model = constant_tree_model(root_positive=True)
    prediction = predict_bipartition(model, [(0, 1.0)])
    assert prediction.nodes_visited == model.num_nodes
    assert prediction.paths_taken == len(model.tree.leaves())
    assert prediction.labels == set(range(12))


def test_negative_root_stops_at_the_root():
    model = constant_tree_model(root_positive=False)
    prediction = predict_bipartition(model, [(0, 1.0)])
    assert prediction.nodes_visited == 1
    assert prediction.labels == set()

    ranking = predict_ranking(model, [(0, 1.0)], prune=True)
    assert ranking.nodes_visited == 1
    assert all(s == 0.0 for _, s in ranking.ranking)
    assert predict_ranking(model, [(0, 1.0)], omit_zeros=True).ranking == []


def test_ties_are_broken_by_label_id():
    tree = LabelTree.single_leaf(5)
    tree.root_node.classifier = NodeClassifier([LinearModel(t) for t in range(5)], 3)
    model = HomerModel(tree, make_power_law_corpus(num_labels=5, num_instances=20).vocab,
                       3, LearnerParams())

    prediction = predict_ranking(model, [(1, 2.0)])
    assert prediction.ranking == [(l, 0.5) for l in range(5)]
    assert prediction.top(2) == [(0, 0.5), (1, 0.5)]


def test_unknown_features_are_ignored_and_counted():
    model, rng = random_model(5)
    x = random_instance(rng)
    with_unknown = x + [(NUM_FEATURES + 3, 7.0), (NUM_FEATURES + 9, -1.0)]

    plain = predict_bipartition(model, x)
    extended = predict_bipartition(model, with_unknown)
    assert extended.labels == plain.labels
    assert extended.unknown_features == 2
    assert predict_ranking(model, with_unknown).ranking == predict_ranking(model, x).ranking


def test_predict_dataset_keeps_order_across_threads():
    ds = make_power_law_corpus(num_labels=15, num_instances=120, seed=9)
    model = train_homer(ds, build_hierarchy(ds, k=3, nmax=4, seed=1), LearnerParams(epochs=15))

    serial = predict_dataset(model, ds, threads=1)
    parallel = predict_dataset(model, ds, threads=4)
    assert [p.labels for p in serial] == [p.labels for p in parallel]

    ranked = predict_dataset(model, ds, mode='ranking', threads=3)
    assert len(ranked) == len(ds)
    with pytest.raises(ValueError):
        predict_dataset(model, ds, mode='probabilities')


def test_traversal_stats():
    model = constant_tree_model(root_positive=False)
    ds = make_power_law_corpus(num_labels=12, num_instances=10, seed=4)
    stats = traversal_stats(model, ds)
    assert stats.num_instances == 10
    assert stats.mean_nodes_visited == 1.0
    assert stats.total_nodes == model.num_nodes

    empty = summarize_traversal(model, [])
    assert empty.num_instances == 0
    assert empty.mean_nodes_visited == 0.0


def test_untrained_model_raises():
    model, _ = random_model(1)
    model.tree.nodes[-1].classifier = None
    with pytest.raises(UntrainedModelError):
        predict_bipartition(model, [(0, 1.0)])
    with pytest.raises(UntrainedModelError):
        predict_ranking(model, [(0, 1.0)])


def hand_built_model(children_labels, root_biases, leaf_biases):
    """Root with one leaf child per label group; every model is a bias-only linear model"""
    root = TreeNode(0, [l for group in children_labels for l in group])
    nodes = [root]
    for group in children_labels:
        leaf = TreeNode(len(nodes), group, depth=1, parent=0)
        nodes.append(leaf)
        root.children.append(leaf.id)
    root.meta_labels = [node.labels for node in nodes[1:]]

    root.classifier = NodeClassifier(
        [LinearModel(c, bias=b) for c, b in zip(root.children, root_biases)], 2)
    for leaf in nodes[1:]:
        leaf.classifier = NodeClassifier(
            [LinearModel(l, bias=leaf_biases[l]) for l in leaf.meta_label_ids], 2)

    num_labels = len(root.labels)
    vocab = make_power_law_corpus(num_labels=num_labels, num_instances=5).vocab
    return HomerModel(LabelTree(nodes), vocab, 2, LearnerParams())


def test_instance_following_two_of_four_paths():
    groups = [[0, 1], [2, 3], [4, 5], [6, 7]]
    leaf_biases = {l: (10.0 if l in (0, 4) else -10.0) for l in range(8)}
    model = hand_built_model(groups, [10.0, -10.0, 10.0, -10.0], leaf_biases)

    prediction = predict_bipartition(model, [(0, 1.0)])
    assert prediction.labels == {0, 4}
    assert prediction.nodes_visited == 3
    assert prediction.paths_taken == 2


def test_child_at_or_below_the_parent_share_is_pruned():
    groups = [[0], [1], [2]]
    # root meta-scores sigmoid(b): 0.2, 0.5, 0.9
    biases = [float(np.log(0.2 / 0.8)), 0.0, float(np.log(0.9 / 0.1))]
    model = hand_built_model(groups, biases, {0: 10.0, 1: 10.0, 2: 10.0})

    pruned = dict(predict_ranking(model, [(0, 1.0)], prune=True).ranking)
    assert pruned[0] == 0.0
    assert pruned[1] > 0.0
    assert pruned[2] > pruned[1]

    full = dict(predict_ranking(model, [(0, 1.0)], prune=False).ranking)
    assert full[0] == pytest.approx(0.2 * score_of(10.0))
    assert full[2] == pruned[2]


def score_of(bias):
    return 1.0 / (1.0 + np.exp(-bias))


def test_all_ones_without_pruning_scores_every_label_one():
    model = constant_tree_model(root_positive=True)
    prediction = predict_ranking(model, [(0, 1.0)], prune=False)
    assert prediction.nodes_visited == model.num_nodes
    assert all(s == 1.0 for _, s in prediction.ranking)
    assert [l for l, _ in prediction.ranking] == list(range(12))
