"""
Label Clustering

Balanced k-means (hard cluster-size cap via sorted lists and cascading
evictions) and plain Lloyd k-means over label occurrence vectors, both
using the generalized Jaccard (Tanimoto) distance.
"""

import bisect
import logging
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence

import numpy as np

from .constants import CLUSTERER_CHOICES, DEFAULT_ITERATIONS, DEFAULT_SEED
from .dataset import MultiLabelDataset
from .exceptions import ConfigError, DimensionMismatchError

logger = logging.getLogger(__name__)


class LabelVector:
    """Binary occurrence vector of one label over the training instances"""

    __slots__ = ('label_id', 'bits', 'dim')

    def __init__(self, label_id: int, bits: Iterable[int], dim: int):
        self.label_id = int(label_id)
        self.bits = np.unique(np.asarray(list(bits), dtype=np.int64))
        self.dim = int(dim)
        if self.bits.size and (self.bits[0] < 0 or self.bits[-1] >= self.dim):
            raise ValueError(f'Label {label_id}: instance index outside [0, {self.dim})')

    def __len__(self) -> int:
        return int(self.bits.size)

    def __repr__(self) -> str:
        return f'LabelVector(label={self.label_id}, ones={self.bits.size}, dim={self.dim})'

    def dense(self) -> np.ndarray:
        vec = np.zeros(self.dim, dtype=np.float64)
        vec[self.bits] = 1.0
        return vec


def build_label_vectors(train: MultiLabelDataset,
                        labels: Optional[Iterable[int]] = None) -> List[LabelVector]:
    """Occurrence vectors V_l(d) = 1 iff l in L_d, for the requested labels"""
    wanted = range(train.num_labels) if labels is None else sorted(labels)
    occurrences = {label_id: [] for label_id in wanted}
    for position, inst in enumerate(train.instances):
        for label_id in inst.labels:
            if label_id in occurrences:
                occurrences[label_id].append(position)
    return [LabelVector(label_id, occurrences[label_id], len(train)) for label_id in wanted]


def distance(v: LabelVector, c: np.ndarray) -> float:
    """
    Generalized Jaccard distance 1 - sum(min) / sum(max) between a binary label
    vector and a real centroid with components in [0, 1]

    Two all-zero vectors are at distance 1.0.
    """
    c = np.asarray(c, dtype=np.float64)
    if c.ndim != 1 or c.shape[0] != v.dim:
        raise DimensionMismatchError(
            f'Label vector has dimension {v.dim}, centroid has {c.shape}'
        )
    return float(_distances(v, c[np.newaxis, :], np.array([c.sum()]))[0])


def _distances(v: LabelVector, centers: np.ndarray, totals: np.ndarray) -> np.ndarray:
    # for binary v and c in [0,1]: sum(min) = c[bits].sum(), sum(max) = |bits| + sum(c) - sum(min)
    if v.bits.size:
        shared = centers[:, v.bits].sum(axis=1)
    else:
        shared = np.zeros(centers.shape[0])
    union = v.bits.size + totals - shared
    with np.errstate(divide='ignore', invalid='ignore'):
        return np.where(union > 0, 1.0 - shared / union, 1.0)


@dataclass
class Clustering:
    """A partition of the input labels into k clusters"""
    assignments: List[List[int]]
    k: int
    total_evictions: int = 0
    longest_cascade: int = 0
    max_point_evictions: int = 0

    def sizes(self) -> List[int]:
        return [len(cluster) for cluster in self.assignments]

    def to_json(self) -> List[List[int]]:
        return [list(cluster) for cluster in self.assignments]


def _validate(points: Sequence[LabelVector], k: int, iterations: int) -> None:
    if k < 1:
        raise ConfigError(f'k must be >= 1, got {k}')
    if iterations < 1:
        raise ConfigError(f'iterations must be >= 1, got {iterations}')
    if len(points) < k:
        raise ConfigError(f'Cannot form {k} clusters from {len(points)} points')
    dims = {p.dim for p in points}
    if len(dims) > 1:
        raise DimensionMismatchError(f'Label vectors have mixed dimensions: {sorted(dims)}')


def _initial_centers(points: Sequence[LabelVector], k: int, rng: np.random.Generator,
                     initial_centers: Optional[Sequence[int]]) -> np.ndarray:
    if initial_centers is None:
        chosen = rng.choice(len(points), size=k, replace=False)
    else:
        chosen = [int(i) for i in initial_centers]
        if len(chosen) != k or len(set(chosen)) != k:
            raise ConfigError(f'initial_centers must be {k} distinct point indices')
        if any(not 0 <= i < len(points) for i in chosen):
            raise ConfigError('initial_centers index out of range')
    return np.vstack([points[i].dense() for i in chosen])


def _mean_center(points: Sequence[LabelVector], members: Sequence[int], dim: int) -> np.ndarray:
    center = np.zeros(dim, dtype=np.float64)
    for p in members:
        center[points[p].bits] += 1.0
    return center / len(members)


def _recompute_centers(points: Sequence[LabelVector], members: List[List[int]],
                       centers: np.ndarray) -> np.ndarray:
    """Means of members; an empty cluster moves to the point farthest from its old center"""
    updated = np.empty_like(centers)
    for i, cluster in enumerate(members):
        if cluster:
            updated[i] = _mean_center(points, cluster, centers.shape[1])
        else:
            old = centers[i:i + 1]
            totals = old.sum(axis=1)
            far = [_distances(p, old, totals)[0] for p in points]
            updated[i] = points[int(np.argmax(far))].dense()
    return updated


def _fill_empty_clusters(points: Sequence[LabelVector], members: List[List[int]],
                         centers: np.ndarray) -> None:
    """Give every empty cluster the farthest member of the largest cluster"""
    totals = centers.sum(axis=1)
    for i, cluster in enumerate(members):
        if cluster:
            continue
        donor = max(range(len(members)), key=lambda j: (len(members[j]), -j))
        far = [_distances(points[p], centers[donor:donor + 1], totals[donor:donor + 1])[0]
               for p in members[donor]]
        moved = members[donor].pop(int(np.argmax(far)))
        cluster.append(moved)
        logger.debug(f'Filled empty cluster {i} with point {moved} from cluster {donor}')


def _to_clustering(points: Sequence[LabelVector], members: List[List[int]], k: int,
                   **telemetry) -> Clustering:
    assignments = [sorted(points[p].label_id for p in cluster) for cluster in members]
    return Clustering(assignments=assignments, k=k, **telemetry)


def balanced_kmeans(points: Sequence[LabelVector], k: int,
                    iterations: int = DEFAULT_ITERATIONS, seed: int = DEFAULT_SEED,
                    initial_centers: Optional[Sequence[int]] = None) -> Clustering:
    """
    Balanced k-means: every cluster holds at most ceil(|S|/k) points

    Each cluster keeps its points in a list sorted by distance to the center.
    When an insertion overflows the cap, the farthest point is evicted and
    re-inserted at its next-nearest cluster (its distance to the cluster it
    left becomes +inf). Clusters an insertion has already passed through stay
    closed to that whole chain, so one insertion evicts at most k-1 points.
    Runs exactly `iterations` passes.

    Args:
        points: Label vectors to cluster
        k: Number of clusters
        iterations: Number of assignment passes
        seed: RNG seed for choosing the initial centers
        initial_centers: Explicit point indices to use as initial centers

    Returns:
        Clustering with k non-empty clusters
    """
    _validate(points, k, iterations)
    rng = np.random.default_rng(seed)
    n = len(points)
    cap = math.ceil(n / k)
    centers = _initial_centers(points, k, rng, initial_centers)

    total_evictions = 0
    longest_cascade = 0
    max_point_evictions = 0
    members: List[List[int]] = []

    for it in range(iterations):
        totals = centers.sum(axis=1)
        sorted_lists: List[list] = [[] for _ in range(k)]
        base = np.empty((n, k))
        work = np.empty((n, k))
        evicted = np.zeros(n, dtype=np.int64)
        seq = 0

        for p in range(n):
            base[p] = _distances(points[p], centers, totals)
            work[p] = base[p]
            nu = p
            cascade = 0
            # clusters this insertion already filled; closed to the rest of its chain
            visited = np.zeros(k, dtype=bool)

            while True:
                row = np.where(visited, np.inf, work[nu])
                if np.all(np.isinf(row)):
                    # evicted everywhere: place in the currently smallest cluster
                    j = min(range(k), key=lambda i: (len(sorted_lists[i]), i))
                    bisect.insort(sorted_lists[j], (base[nu, j], seq, nu))
                    seq += 1
                    break

                j = int(np.argmin(row))
                bisect.insort(sorted_lists[j], (row[j], seq, nu))
                seq += 1
                if len(sorted_lists[j]) <= cap:
                    break

                _, _, nu = sorted_lists[j].pop()
                work[nu, j] = np.inf
                visited[j] = True
                evicted[nu] += 1
                cascade += 1

            total_evictions += cascade
            longest_cascade = max(longest_cascade, cascade)

        max_point_evictions = max(max_point_evictions, int(evicted.max(initial=0)))
        members = [[entry[2] for entry in entries] for entries in sorted_lists]
        logger.debug(
            f'Balanced k-means pass {it + 1}/{iterations}: sizes '
            f'{[len(m) for m in members]}, evictions {int(evicted.sum())}'
        )

        if it < iterations - 1:
            centers = _recompute_centers(points, members, centers)

    _fill_empty_clusters(points, members, centers)
    return _to_clustering(
        points, members, k,
        total_evictions=total_evictions,
        longest_cascade=longest_cascade,
        max_point_evictions=max_point_evictions,
    )


def plain_kmeans(points: Sequence[LabelVector], k: int,
                 iterations: int = DEFAULT_ITERATIONS, seed: int = DEFAULT_SEED,
                 initial_centers: Optional[Sequence[int]] = None) -> Clustering:
    """Lloyd k-means with the same distance and a fixed number of passes"""
    _validate(points, k, iterations)
    rng = np.random.default_rng(seed)
    centers = _initial_centers(points, k, rng, initial_centers)
    members: List[List[int]] = []

    for it in range(iterations):
        totals = centers.sum(axis=1)
        members = [[] for _ in range(k)]
        for p, point in enumerate(points):
            members[int(np.argmin(_distances(point, centers, totals)))].append(p)

        if it < iterations - 1:
            centers = _recompute_centers(points, members, centers)

    _fill_empty_clusters(points, members, centers)
    return _to_clustering(points, members, k)


class Clusterer(ABC):
    """Partitions a set of label vectors into k clusters"""

    kind: str = ''

    def __init__(self, iterations: int = DEFAULT_ITERATIONS):
        self.iterations = iterations

    @abstractmethod
    def cluster(self, points: Sequence[LabelVector], k: int, seed: int) -> Clustering:
        ...


class BalancedKMeans(Clusterer):
    kind = 'balanced-kmeans'

    def cluster(self, points: Sequence[LabelVector], k: int, seed: int) -> Clustering:
        return balanced_kmeans(points, k, self.iterations, seed)


class KMeans(Clusterer):
    kind = 'kmeans'

    def cluster(self, points: Sequence[LabelVector], k: int, seed: int) -> Clustering:
        return plain_kmeans(points, k, self.iterations, seed)


def make_clusterer(kind: str, iterations: int = DEFAULT_ITERATIONS) -> Clusterer:
    """Clusterer factory for the names accepted on the command line"""
    if kind == BalancedKMeans.kind:
        return BalancedKMeans(iterations)
    if kind == KMeans.kind:
        return KMeans(iterations)
    raise ConfigError(f'Unknown clusterer {kind!r}; choose from {", ".join(CLUSTERER_CHOICES)}')
