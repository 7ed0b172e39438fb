"""
Synthetic Corpora

Generators for corpora with known structure, used by the property suites,
acceptance checks and benchmark smoke runs:

- grouped: labels come in disjoint groups that only co-occur within a group,
  and every label owns dedicated features, so groups are perfectly separable
- power-law: label frequencies follow a Zipf-like law, giving a long tail of
  rare labels next to a few frequent ones
"""

import logging
from typing import List, Set, Tuple

import numpy as np

from .dataset import LabelVocabulary, MultiLabelDataset, SparseInstance

logger = logging.getLogger(__name__)


def _prototype_features(label_id: int, features_per_label: int) -> List[int]:
    start = label_id * features_per_label
    return list(range(start, start + features_per_label))


def _instance(rng: np.random.Generator, labels: Set[int], features_per_label: int,
              keep: float, noise_offset: int, noise_features: int,
              noise_per_instance: int) -> SparseInstance:
    fids: Set[int] = set()
    for label_id in labels:
        proto = _prototype_features(label_id, features_per_label)
        kept = [f for f in proto if rng.random() < keep]
        fids.update(kept or [proto[int(rng.integers(len(proto)))]])
    if noise_features and noise_per_instance:
        draws = rng.choice(noise_features, size=min(noise_per_instance, noise_features),
                           replace=False)
        fids.update(noise_offset + int(d) for d in draws)
    return SparseInstance.from_pairs([(f, 1.0) for f in fids], labels)


def make_grouped_corpus(num_labels: int, group_size: int = 3, instances_per_group: int = 20,
                        features_per_label: int = 4, seed: int = 0) -> MultiLabelDataset:
    """
    Corpus whose label groups are perfectly separable

    Labels [g * group_size, (g + 1) * group_size) form group g. Every instance
    draws a non-empty subset of one group and carries all dedicated features
    of its labels.
    """
    if num_labels < 1 or group_size < 1:
        raise ValueError('num_labels and group_size must be >= 1')
    rng = np.random.default_rng(seed)
    groups = [list(range(start, min(start + group_size, num_labels)))
              for start in range(0, num_labels, group_size)]

    instances = []
    for group in groups:
        for _ in range(instances_per_group):
            mask = rng.random(len(group)) < 0.5
            if not mask.any():
                mask[int(rng.integers(len(group)))] = True
            labels = {label_id for label_id, on in zip(group, mask) if on}
            instances.append(_instance(rng, labels, features_per_label, 1.0, 0, 0, 0))

    order = rng.permutation(len(instances))
    instances = [instances[i] for i in order]
    return MultiLabelDataset(LabelVocabulary.from_range(num_labels), instances,
                             num_labels * features_per_label)


def make_power_law_corpus(num_labels: int = 60, num_instances: int = 2000,
                          exponent: float = 1.1, mean_extra_labels: float = 0.8,
                          features_per_label: int = 5, keep: float = 0.6,
                          noise_features: int = 50, noise_per_instance: int = 3,
                          seed: int = 0) -> MultiLabelDataset:
    """
    Corpus with Zipf-distributed label frequencies

    Label l is drawn with probability proportional to (l + 1) ** -exponent,
    so low ids are frequent and high ids rare. Each instance has
    1 + Poisson(mean_extra_labels) distinct labels; each label contributes a
    random subset (probability keep) of its dedicated features, plus a few
    shared noise features.
    """
    if num_labels < 1 or num_instances < 1:
        raise ValueError('num_labels and num_instances must be >= 1')
    rng = np.random.default_rng(seed)
    weights = (np.arange(num_labels) + 1.0) ** -exponent
    probabilities = weights / weights.sum()
    noise_offset = num_labels * features_per_label

    instances = []
    for _ in range(num_instances):
        cardinality = min(num_labels, 1 + int(rng.poisson(mean_extra_labels)))
        labels = set(int(l) for l in rng.choice(num_labels, size=cardinality,
                                                replace=False, p=probabilities))
        instances.append(_instance(rng, labels, features_per_label, keep, noise_offset,
                                   noise_features, noise_per_instance))

    logger.debug(f'Generated power-law corpus: {num_instances} instances, {num_labels} labels')
    return MultiLabelDataset(LabelVocabulary.from_range(num_labels), instances,
                             noise_offset + noise_features)


def train_test_split(ds: MultiLabelDataset, test_fraction: float = 0.3,
                     seed: int = 0) -> Tuple[MultiLabelDataset, MultiLabelDataset]:
    """Shuffle and split a dataset; both parts keep its vocabulary and feature space"""
    if not 0.0 < test_fraction < 1.0:
        raise ValueError(f'test_fraction must be in (0, 1), got {test_fraction}')
    order = np.random.default_rng(seed).permutation(len(ds))
    cut = int(round(len(ds) * (1.0 - test_fraction)))
    train = ds.with_instances([ds.instances[i] for i in order[:cut]])
    test = ds.with_instances([ds.instances[i] for i in order[cut:]])
    return train, test
