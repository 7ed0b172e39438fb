"""Tests for label vectors, the Jaccard distance and the clusterers"""

import math

import numpy as np
import pytest

from homer.clustering import (
    BalancedKMeans,
    KMeans,
    LabelVector,
    balanced_kmeans,
    build_label_vectors,
    distance,
    make_clusterer,
    plain_kmeans,
)
from homer.exceptions import ConfigError, DimensionMismatchError


def random_points(rng, n, dim, density=0.1):
    points = []
    for label_id in range(n):
        bits = np.flatnonzero(rng.random(dim) < density)
        points.append(LabelVector(label_id, bits, dim))
    return points


def two_group_points():
    # labels 0-2 occur in instances {0, 1}, labels 3-5 in {2, 3}
    return [LabelVector(i, [0, 1] if i < 3 else [2, 3], 4) for i in range(6)]


def test_build_label_vectors(toy_dataset):
    vectors = build_label_vectors(toy_dataset)
    assert [v.label_id for v in vectors] == [0, 1, 2, 3]
    assert vectors[0].bits.tolist() == [0, 1, 4]
    assert vectors[3].bits.tolist() == []
    assert vectors[1].dense().tolist() == [0, 1, 1, 0, 0, 1]

    subset = build_label_vectors(toy_dataset, labels=[2, 0])
    assert [v.label_id for v in subset] == [0, 2]


def test_distance_identical_and_disjoint():
    v = LabelVector(0, [0, 1], 4)
    assert distance(v, np.array([1.0, 1.0, 0.0, 0.0])) == 0.0
    assert distance(v, np.array([0.0, 0.0, 1.0, 1.0])) == 1.0


def test_distance_against_fractional_centroid():
    v = LabelVector(0, [0], 2)
    # sum(min) = 0.5, sum(max) = 1 + 0.5
    assert distance(v, np.array([0.5, 0.5])) == pytest.approx(1.0 - 0.5 / 1.5)


def test_distance_of_two_empty_vectors_is_one():
    assert distance(LabelVector(0, [], 3), np.zeros(3)) == 1.0


def test_distance_matches_generalized_jaccard():
    rng = np.random.default_rng(0)
    for _ in range(20):
        v = random_points(rng, 1, 15, density=0.4)[0]
        c = rng.random(15)
        dense = v.dense()
        expected = 1.0 - np.minimum(dense, c).sum() / np.maximum(dense, c).sum()
        assert distance(v, c) == pytest.approx(expected, abs=1e-12)


def test_distance_dimension_mismatch():
    with pytest.raises(DimensionMismatchError):
        distance(LabelVector(0, [0], 3), np.zeros(4))


def test_balanced_kmeans_respects_the_size_cap_on_random_sets():
    rng = np.random.default_rng(2024)
    for case in range(200):
        n = int(rng.integers(3, 401))
        k = int(rng.integers(1, n + 1))
        iterations = int(rng.integers(1, 6))
        points = random_points(rng, n, 40, density=float(rng.uniform(0.02, 0.3)))

        clustering = balanced_kmeans(points, k, iterations=iterations, seed=case)

        cap = math.ceil(n / k)
        assert len(clustering.assignments) == k
        assert all(1 <= size <= cap for size in clustering.sizes()), (case, n, k)
        flat = sorted(l for cluster in clustering.assignments for l in cluster)
        assert flat == list(range(n))
        assert clustering.longest_cascade <= k - 1, (case, n, k)
        assert clustering.total_evictions >= clustering.longest_cascade
        assert clustering.max_point_evictions <= clustering.total_evictions


def test_balanced_kmeans_is_deterministic_under_a_seed():
    rng = np.random.default_rng(5)
    points = random_points(rng, 60, 30, density=0.2)
    first = balanced_kmeans(points, 4, iterations=3, seed=11)
    second = balanced_kmeans(points, 4, iterations=3, seed=11)
    assert first.assignments == second.assignments
    assert first.total_evictions == second.total_evictions


def test_balanced_kmeans_single_cluster():
    points = random_points(np.random.default_rng(1), 7, 10)
    clustering = balanced_kmeans(points, 1)
    assert clustering.assignments == [list(range(7))]


def test_balanced_kmeans_finds_co_occurring_groups():
    clustering = balanced_kmeans(two_group_points(), 2, iterations=2, initial_centers=[0, 3])
    assert clustering.assignments == [[0, 1, 2], [3, 4, 5]]
    assert clustering.total_evictions == 0


def test_balanced_kmeans_one_point_per_cluster():
    clustering = balanced_kmeans(two_group_points(), 6, iterations=2, seed=3)
    assert sorted(clustering.sizes()) == [1] * 6


def test_overfull_cluster_evicts_its_farthest_point():
    # every point is nearest to center 0, so the cap forces evictions
    points = [LabelVector(i, [0], 2) for i in range(3)] + [LabelVector(3, [0, 1], 2)]
    clustering = balanced_kmeans(points, 2, iterations=1, initial_centers=[0, 3])
    assert clustering.sizes() == [2, 2]
    assert clustering.total_evictions >= 1


def test_plain_kmeans_two_groups():
    clustering = plain_kmeans(two_group_points(), 2, iterations=3, initial_centers=[0, 3])
    assert clustering.assignments == [[0, 1, 2], [3, 4, 5]]


def test_plain_kmeans_partitions_without_empty_clusters():
    rng = np.random.default_rng(9)
    for case in range(30):
        n = int(rng.integers(3, 80))
        k = int(rng.integers(1, min(n, 8) + 1))
        points = random_points(rng, n, 20, density=0.15)
        clustering = plain_kmeans(points, k, iterations=3, seed=case)
        assert all(size >= 1 for size in clustering.sizes())
        assert sorted(l for c in clustering.assignments for l in c) == list(range(n))


def test_invalid_arguments():
    points = two_group_points()
    with pytest.raises(ConfigError):
        balanced_kmeans(points, 7)
    with pytest.raises(ConfigError):
        balanced_kmeans(points, 0)
    with pytest.raises(ConfigError):
        balanced_kmeans(points, 2, iterations=0)
    with pytest.raises(ConfigError):
        balanced_kmeans(points, 2, initial_centers=[0, 0])
    with pytest.raises(DimensionMismatchError):
        balanced_kmeans(points + [LabelVector(6, [0], 5)], 2)


def test_clusterer_factory():
    assert isinstance(make_clusterer('balanced-kmeans', 2), BalancedKMeans)
    assert isinstance(make_clusterer('kmeans'), KMeans)
    assert make_clusterer('kmeans', 4).iterations == 4
    with pytest.raises(ConfigError):
        make_clusterer('spectral')


def test_clustering_json():
    clustering = make_clusterer('balanced-kmeans').cluster(two_group_points(), 2, seed=0)
    assert sorted(map(sorted, clustering.to_json())) == [[0, 1, 2], [3, 4, 5]]


def test_distance_between_overlapping_sets():
    v = LabelVector(0, [0, 1], 3)
    assert distance(v, np.array([0.0, 1.0, 1.0])) == pytest.approx(2 / 3)


def test_balanced_kmeans_pairs_overlapping_vectors():
    points = [LabelVector(i, bits, 13) for i, bits in enumerate([[0, 1], [0, 2], [10, 11], [10, 12]])]
    clustering = balanced_kmeans(points, 2, iterations=3, initial_centers=[0, 2])
    assert clustering.assignments == [[0, 1], [2, 3]]


def test_seven_points_in_three_clusters():
    points = random_points(np.random.default_rng(4), 7, 12, density=0.3)
    sizes = balanced_kmeans(points, 3, iterations=2, seed=1).sizes()
    assert sum(sizes) == 7
    assert max(sizes) <= 3
    assert min(sizes) >= 1


def test_plain_kmeans_one_cluster_per_distinct_point():
    points = [LabelVector(i, [i], 5) for i in range(5)]
    clustering = plain_kmeans(points, 5, iterations=1, seed=0)
    assert sorted(clustering.sizes()) == [1] * 5
    assert plain_kmeans(points, 1).assignments == [list(range(5))]
