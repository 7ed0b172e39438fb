"""
Multi-label Evaluation

Per-label confusion counts, Micro-F and Macro-F, and label-frequency
bucketed breakdowns (rare / mid / frequent by training frequency).
"""

import bisect
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, Iterable, List, Optional, Sequence

import numpy as np

from .constants import DEFAULT_BUCKET_BOUNDS, DEFAULT_BUCKET_NAMES

logger = logging.getLogger(__name__)


@dataclass
class ConfusionCounts:
    """tp / fp / fn per label id"""
    tp: np.ndarray
    fp: np.ndarray
    fn: np.ndarray

    @property
    def num_labels(self) -> int:
        return int(self.tp.shape[0])

    def subset(self, label_ids: Sequence[int]) -> 'ConfusionCounts':
        ids = np.asarray(label_ids, dtype=np.int64)
        return ConfusionCounts(self.tp[ids], self.fp[ids], self.fn[ids])

    def true_frequencies(self) -> np.ndarray:
        return self.tp + self.fn


def confusion(truth: Sequence[Iterable[int]], predicted: Sequence[Iterable[int]],
              num_labels: int) -> ConfusionCounts:
    """
    Count tp, fp and fn per label over aligned per-instance label sets

    Raises:
        ValueError: If the sequences differ in length or hold ids outside [0, num_labels)
    """
    if len(truth) != len(predicted):
        raise ValueError(f'{len(truth)} truth rows but {len(predicted)} prediction rows')

    tp = np.zeros(num_labels, dtype=np.int64)
    fp = np.zeros(num_labels, dtype=np.int64)
    fn = np.zeros(num_labels, dtype=np.int64)

    for true_labels, pred_labels in zip(truth, predicted):
        true_set = set(true_labels)
        pred_set = set(pred_labels)
        for label_id in true_set | pred_set:
            if not 0 <= label_id < num_labels:
                raise ValueError(f'Label id {label_id} outside [0, {num_labels})')
        for label_id in true_set & pred_set:
            tp[label_id] += 1
        for label_id in pred_set - true_set:
            fp[label_id] += 1
        for label_id in true_set - pred_set:
            fn[label_id] += 1

    return ConfusionCounts(tp, fp, fn)


def _f1(tp: int, fp: int, fn: int) -> float:
    denominator = 2 * tp + fp + fn
    return 2 * tp / denominator if denominator else 0.0


def micro_f1(c: ConfusionCounts) -> float:
    """2 * sum(tp) / (2 * sum(tp) + sum(fp) + sum(fn)); 0.0 when nothing was counted"""
    return _f1(int(c.tp.sum()), int(c.fp.sum()), int(c.fn.sum()))


def per_label_f1(c: ConfusionCounts) -> List[float]:
    return [_f1(int(tp), int(fp), int(fn)) for tp, fp, fn in zip(c.tp, c.fp, c.fn)]


def macro_f1(c: ConfusionCounts) -> float:
    """Mean per-label F1 over every label (0/0 counts as 0.0)"""
    if c.num_labels == 0:
        return 0.0
    return math.fsum(per_label_f1(c)) / c.num_labels


@dataclass
class BucketScore:
    """Scores restricted to the labels of one frequency bucket"""
    name: str
    num_labels: int
    micro_f: float
    macro_f: float

    def to_dict(self) -> Dict[str, Any]:
        return {'num_labels': self.num_labels, 'micro_f': self.micro_f, 'macro_f': self.macro_f}


def bucket_index(frequency: int, bounds: Sequence[int]) -> int:
    """First bucket holds f <= bounds[0]; the last holds f >= bounds[-1]"""
    if not bounds:
        return 0
    if frequency >= bounds[-1]:
        return len(bounds)
    return bisect.bisect_left(list(bounds), frequency)


def _bucket_names(bounds: Sequence[int], names: Optional[Sequence[str]]) -> List[str]:
    if names is not None:
        if len(names) != len(bounds) + 1:
            raise ValueError(f'{len(bounds)} bounds need {len(bounds) + 1} bucket names')
        return list(names)
    if len(bounds) == len(DEFAULT_BUCKET_NAMES) - 1:
        return list(DEFAULT_BUCKET_NAMES)
    return [f'bucket_{i}' for i in range(len(bounds) + 1)]


def bucketed_report(c: ConfusionCounts, label_frequencies: Sequence[int],
                    bounds: Sequence[int] = DEFAULT_BUCKET_BOUNDS,
                    names: Optional[Sequence[str]] = None) -> Dict[str, BucketScore]:
    """
    Micro/Macro-F within label-frequency buckets

    Args:
        c: Confusion counts over the full vocabulary
        label_frequencies: Training-split frequency of each label
        bounds: Ascending bucket boundaries
        names: Optional bucket names (defaults to rare/mid/frequent for two bounds)

    Returns:
        Mapping bucket name -> BucketScore; buckets without labels are absent
    """
    bounds = list(bounds)
    if any(a >= b for a, b in zip(bounds, bounds[1:])):
        raise ValueError(f'Bucket bounds must be strictly ascending: {bounds}')
    if len(label_frequencies) != c.num_labels:
        raise ValueError('label_frequencies must cover every label')

    bucket_names = _bucket_names(bounds, names)
    members: Dict[int, List[int]] = {}
    for label_id, frequency in enumerate(label_frequencies):
        members.setdefault(bucket_index(int(frequency), bounds), []).append(label_id)

    report: Dict[str, BucketScore] = {}
    for index, name in enumerate(bucket_names):
        if index not in members:
            continue
        sub = c.subset(members[index])
        report[name] = BucketScore(name, len(members[index]), micro_f1(sub), macro_f1(sub))
    return report


@dataclass
class EvaluationReport:
    """Metrics plus timing and traversal telemetry for one run"""
    micro_f: float
    macro_f: float
    per_label_f1: List[float] = field(default_factory=list)
    buckets: Dict[str, BucketScore] = field(default_factory=dict)
    train_s: float = 0.0
    predict_s: float = 0.0
    traversal: Optional[Dict[str, Any]] = None
    num_instances: int = 0

    def to_dict(self, include_per_label: bool = True) -> Dict[str, Any]:
        data: Dict[str, Any] = {
            'micro_f': self.micro_f,
            'macro_f': self.macro_f,
            'num_instances': self.num_instances,
            'buckets': {name: b.to_dict() for name, b in self.buckets.items()},
            'train_s': self.train_s,
            'predict_s': self.predict_s,
            'traversal': self.traversal,
        }
        if include_per_label:
            data['per_label_f1'] = list(self.per_label_f1)
        return data


def evaluate(truth: Sequence[Iterable[int]], predicted: Sequence[Iterable[int]],
             num_labels: int, label_frequencies: Optional[Sequence[int]] = None,
             bounds: Sequence[int] = DEFAULT_BUCKET_BOUNDS) -> EvaluationReport:
    """Confusion counts, global scores and (given training frequencies) bucket scores"""
    counts = confusion(truth, predicted, num_labels)
    report = EvaluationReport(
        micro_f=micro_f1(counts),
        macro_f=macro_f1(counts),
        per_label_f1=per_label_f1(counts),
        num_instances=len(truth),
    )
    if label_frequencies is not None:
        report.buckets = bucketed_report(counts, label_frequencies, bounds)

    logger.info(f'Micro-F {report.micro_f:.5f}, Macro-F {report.macro_f:.5f} '
                f'over {len(truth)} instances')
    return report
