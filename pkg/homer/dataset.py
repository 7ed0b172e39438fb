"""
Sparse Multi-label Dataset

Loads, validates, and summarizes multi-label corpora stored in the
svmlight/LSHTC-style line format:

    lab1,lab2,... idx:val idx:val ...

with an optional leading `N_instances N_features N_labels` header line,
`#` comment lines and an optional sidecar file of label names (one per line).
"""

import hashlib
import logging
import math
from pathlib import Path
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.sparse as sp

from .exceptions import ConfigError, DatasetFormatError

logger = logging.getLogger(__name__)

SUPPORTED_FORMATS = ('svmlight-multilabel',)

PathLike = Union[str, Path]


class LabelVocabulary:
    """Ordered label names with dense ids 0..|L|-1"""

    def __init__(self, labels: Iterable[str]):
        self.labels: Tuple[str, ...] = tuple(str(name) for name in labels)
        if not self.labels:
            raise ValueError('Label vocabulary must not be empty')

        self.index: Dict[str, int] = {}
        for label_id, name in enumerate(self.labels):
            if not name or any(ch.isspace() for ch in name) or ',' in name:
                raise ValueError(f'Invalid label name: {name!r}')
            if name in self.index:
                raise ValueError(f'Duplicate label name: {name!r}')
            self.index[name] = label_id

    @classmethod
    def from_range(cls, num_labels: int) -> 'LabelVocabulary':
        """Vocabulary whose names are the decimal ids themselves"""
        return cls(str(i) for i in range(num_labels))

    def __len__(self) -> int:
        return len(self.labels)

    def __eq__(self, other) -> bool:
        return isinstance(other, LabelVocabulary) and self.labels == other.labels

    def __hash__(self) -> int:
        return hash(self.labels)

    def __repr__(self) -> str:
        return f'LabelVocabulary({len(self.labels)} labels)'

    def name_of(self, label_id: int) -> str:
        return self.labels[label_id]

    def id_of(self, name: str) -> int:
        return self.index[name]

    def resolve(self, token: str) -> Optional[int]:
        """Map a label token to its id: exact name first, then integer index"""
        label_id = self.index.get(token)
        if label_id is not None:
            return label_id
        if token.isdigit() and int(token) < len(self.labels):
            return int(token)
        return None


def vocab_hash(vocab: LabelVocabulary) -> str:
    """Order-sensitive digest of the label names"""
    digest = hashlib.sha256('\n'.join(vocab.labels).encode('utf-8'))
    return digest.hexdigest()


class SparseInstance:
    """One instance: sorted sparse features and a (possibly empty) label set"""

    __slots__ = ('indices', 'values', 'labels')

    def __init__(self, indices: Sequence[int], values: Sequence[float],
                 labels: Iterable[int] = ()):
        self.indices = np.asarray(indices, dtype=np.int64)
        self.values = np.asarray(values, dtype=np.float64)
        self.labels: FrozenSet[int] = frozenset(int(l) for l in labels)

        if self.indices.shape != self.values.shape or self.indices.ndim != 1:
            raise ValueError('Feature ids and values must be aligned 1-D sequences')
        if self.indices.size:
            if self.indices[0] < 0:
                raise ValueError('Feature ids must be non-negative')
            if np.any(np.diff(self.indices) <= 0):
                raise ValueError('Feature ids must be strictly increasing')
            if not np.all(np.isfinite(self.values)):
                raise ValueError('Feature values must be finite')

    @classmethod
    def from_pairs(cls, pairs: Iterable[Tuple[int, float]],
                   labels: Iterable[int] = ()) -> 'SparseInstance':
        """Build from (feature_id, value) pairs in any order"""
        ordered = sorted(pairs)
        return cls([p[0] for p in ordered], [p[1] for p in ordered], labels)

    @property
    def features(self) -> List[Tuple[int, float]]:
        return [(int(i), float(v)) for i, v in zip(self.indices, self.values)]

    def __eq__(self, other) -> bool:
        if not isinstance(other, SparseInstance):
            return NotImplemented
        return (self.labels == other.labels
                and np.array_equal(self.indices, other.indices)
                and np.array_equal(self.values, other.values))

    def __repr__(self) -> str:
        return f'SparseInstance(labels={sorted(self.labels)}, features={self.features})'


class MultiLabelDataset:
    """Immutable collection of sparse instances over a shared vocabulary"""

    def __init__(self, vocab: LabelVocabulary, instances: Sequence[SparseInstance],
                 num_features: int):
        if num_features <= 0:
            raise ValueError(f'num_features must be positive, got {num_features}')

        self.vocab = vocab
        self.instances: Tuple[SparseInstance, ...] = tuple(instances)
        self.num_features = int(num_features)
        self._matrix: Optional[sp.csr_matrix] = None

        num_labels = len(vocab)
        for position, inst in enumerate(self.instances):
            if inst.indices.size and inst.indices[-1] >= self.num_features:
                raise ValueError(
                    f'Instance {position}: feature id {inst.indices[-1]} >= '
                    f'num_features {self.num_features}'
                )
            if inst.labels and max(inst.labels) >= num_labels:
                raise ValueError(
                    f'Instance {position}: label id {max(inst.labels)} >= '
                    f'|L| {num_labels}'
                )

    def __len__(self) -> int:
        return len(self.instances)

    def __iter__(self):
        return iter(self.instances)

    def __getitem__(self, position: int) -> SparseInstance:
        return self.instances[position]

    @property
    def num_labels(self) -> int:
        return len(self.vocab)

    def label_sets(self) -> List[FrozenSet[int]]:
        return [inst.labels for inst in self.instances]

    def with_instances(self, instances: Sequence[SparseInstance]) -> 'MultiLabelDataset':
        """New dataset sharing vocabulary and feature space"""
        return MultiLabelDataset(self.vocab, instances, self.num_features)

    def feature_matrix(self) -> sp.csr_matrix:
        """CSR matrix of shape (|instances|, num_features); built once"""
        if self._matrix is None:
            self._matrix = csr_from_rows(
                [(inst.indices, inst.values) for inst in self.instances], self.num_features
            )
        return self._matrix


def csr_from_rows(rows: Sequence[Tuple[np.ndarray, np.ndarray]],
                  num_features: int) -> sp.csr_matrix:
    """Stack sorted (ids, values) rows into a CSR matrix"""
    indptr = np.zeros(len(rows) + 1, dtype=np.int64)
    for position, (ids, _) in enumerate(rows):
        indptr[position + 1] = indptr[position] + ids.size

    if rows:
        indices = np.concatenate([ids for ids, _ in rows]).astype(np.int64)
        data = np.concatenate([vals for _, vals in rows]).astype(np.float64)
    else:
        indices = np.zeros(0, dtype=np.int64)
        data = np.zeros(0, dtype=np.float64)

    return sp.csr_matrix((data, indices, indptr), shape=(len(rows), num_features))


class DatasetStats:
    """Corpus statistics in the layout of the usual dataset tables"""

    def __init__(self, num_instances: int, num_labels: int, num_features: int,
                 label_frequencies: Sequence[int]):
        self.num_instances = int(num_instances)
        self.num_labels = int(num_labels)
        self.num_features = int(num_features)
        self.label_frequencies = np.asarray(label_frequencies, dtype=np.int64)

        total = int(self.label_frequencies.sum())
        self.cardinality = total / self.num_instances if self.num_instances else 0.0
        self.avg_label_frequency = total / self.num_labels if self.num_labels else 0.0

    def to_dict(self) -> Dict[str, object]:
        return {
            'num_instances': self.num_instances,
            'num_labels': self.num_labels,
            'num_features': self.num_features,
            'cardinality': self.cardinality,
            'avg_label_frequency': self.avg_label_frequency,
            'label_frequencies': [int(f) for f in self.label_frequencies],
        }


def label_frequencies(ds: MultiLabelDataset) -> np.ndarray:
    """Number of instances carrying each label"""
    counts = np.zeros(ds.num_labels, dtype=np.int64)
    for inst in ds.instances:
        for label_id in inst.labels:
            counts[label_id] += 1
    return counts


def compute_stats(ds: MultiLabelDataset) -> DatasetStats:
    """
    Compute corpus statistics

    Args:
        ds: Non-empty dataset

    Returns:
        DatasetStats with exact counts, label cardinality and average frequency
    """
    if len(ds) == 0:
        raise ValueError('Cannot compute statistics of an empty dataset')
    return DatasetStats(len(ds), ds.num_labels, ds.num_features, label_frequencies(ds))


def filter_by_labels(ds: MultiLabelDataset, subset: Iterable[int]) -> MultiLabelDataset:
    """
    Keep the instances annotated with at least one label of `subset`

    Label sets are kept whole; restriction to the subset happens when
    node targets are built.
    """
    wanted = frozenset(subset)
    unknown = [l for l in wanted if not 0 <= l < ds.num_labels]
    if unknown:
        raise ValueError(f'Label ids outside vocabulary: {sorted(unknown)}')

    return ds.with_instances([inst for inst in ds.instances if inst.labels & wanted])


def labeled_only(ds: MultiLabelDataset) -> MultiLabelDataset:
    """Drop instances with an empty label set; they carry no training signal"""
    kept = [inst for inst in ds.instances if inst.labels]
    dropped = len(ds) - len(kept)
    if dropped == 0:
        return ds
    logger.warning(f'Ignoring {dropped} unlabeled instances for training')
    return ds.with_instances(kept)


def load_label_names(path: PathLike) -> LabelVocabulary:
    """Read a sidecar label-name file: one name per line, line i is id i"""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f'Label name file not found: {path}')

    with open(path, 'r', encoding='utf-8') as f:
        names = [line.strip() for line in f if line.strip()]

    try:
        return LabelVocabulary(names)
    except ValueError as e:
        raise DatasetFormatError(str(path), None, str(e)) from e


def _parse_header(tokens: List[str]) -> Optional[Tuple[int, int, int]]:
    if len(tokens) != 3 or not all(tok.isdigit() for tok in tokens):
        return None
    return int(tokens[0]), int(tokens[1]), int(tokens[2])


def _parse_line(path: Path, line_no: int, line: str,
                declared_features: Optional[int]) -> Tuple[List[str], List[Tuple[int, float]]]:
    tokens = line.split()
    label_tokens: List[str] = []

    if tokens and ':' not in tokens[0] and not line[0].isspace():
        label_field = tokens.pop(0)
        for token in label_field.split(','):
            token = token.strip()
            if not token:
                raise DatasetFormatError(str(path), line_no, f'empty label in {label_field!r}')
            if token not in label_tokens:
                label_tokens.append(token)

    pairs: List[Tuple[int, float]] = []
    seen = set()
    for token in tokens:
        feature_id, sep, raw_value = token.partition(':')
        if not sep:
            raise DatasetFormatError(str(path), line_no, f'expected idx:val, got {token!r}')
        try:
            fid = int(feature_id)
            value = float(raw_value)
        except ValueError:
            raise DatasetFormatError(str(path), line_no, f'bad feature token {token!r}')

        if fid < 0:
            raise DatasetFormatError(str(path), line_no, f'negative feature id {fid}')
        if not math.isfinite(value):
            raise DatasetFormatError(str(path), line_no, f'non-finite value in {token!r}')
        if fid in seen:
            raise DatasetFormatError(str(path), line_no, f'duplicate feature id {fid}')
        if declared_features is not None and fid >= declared_features:
            raise DatasetFormatError(
                str(path), line_no,
                f'feature id {fid} >= declared num_features {declared_features}'
            )
        seen.add(fid)
        pairs.append((fid, value))

    return label_tokens, pairs


def load_dataset(path: PathLike, format: str = 'svmlight-multilabel',
                 vocab: Optional[LabelVocabulary] = None,
                 label_names_path: Optional[PathLike] = None,
                 allow_unknown_labels: bool = False) -> MultiLabelDataset:
    """
    Load a multi-label dataset file

    Args:
        path: Dataset file
        format: File format (only 'svmlight-multilabel')
        vocab: Fixed vocabulary (e.g. a trained model's); tokens resolve by name,
            then by integer index
        label_names_path: Sidecar label-name file, used when vocab is None
        allow_unknown_labels: Skip labels missing from a fixed vocabulary
            instead of failing

    Returns:
        MultiLabelDataset

    Raises:
        FileNotFoundError: If the file does not exist
        DatasetFormatError: On a malformed line (message names the line number)
    """
    if format not in SUPPORTED_FORMATS:
        raise ConfigError(f'Unsupported dataset format: {format}')

    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f'Dataset file not found: {path}')

    if vocab is None and label_names_path is not None:
        vocab = load_label_names(label_names_path)

    header: Optional[Tuple[int, int, int]] = None
    rows: List[Tuple[int, List[str], List[Tuple[int, float]]]] = []

    with open(path, 'r', encoding='utf-8') as f:
        for line_no, raw in enumerate(f, start=1):
            line = raw.rstrip('\r\n')
            stripped = line.strip()
            if not stripped or stripped.startswith('#'):
                continue

            if header is None and not rows:
                header = _parse_header(stripped.split())
                if header is not None:
                    continue

            declared_features = header[1] if header else None
            label_tokens, pairs = _parse_line(path, line_no, line, declared_features)
            rows.append((line_no, label_tokens, pairs))

    if header is not None and header[0] != len(rows):
        logger.warning(f'{path}: header declares {header[0]} instances, found {len(rows)}')

    label_ids, vocab = _resolve_labels(path, rows, vocab, header, allow_unknown_labels)

    if header is not None:
        num_features = header[1]
    else:
        max_fid = max((fid for _, _, pairs in rows for fid, _ in pairs), default=-1)
        num_features = max(max_fid + 1, 1)

    instances = [
        SparseInstance.from_pairs(pairs, labels)
        for (_, _, pairs), labels in zip(rows, label_ids)
    ]

    ds = MultiLabelDataset(vocab, instances, num_features)
    logger.info(
        f'Loaded {len(ds)} instances, {ds.num_labels} labels, '
        f'{ds.num_features} features from {path}'
    )
    return ds


def _resolve_labels(path: Path, rows, vocab: Optional[LabelVocabulary],
                    header: Optional[Tuple[int, int, int]],
                    allow_unknown_labels: bool) -> Tuple[List[List[int]], LabelVocabulary]:
    if vocab is not None:
        label_ids: List[List[int]] = []
        skipped = 0
        for line_no, tokens, _ in rows:
            ids = []
            for token in tokens:
                label_id = vocab.resolve(token)
                if label_id is None:
                    if not allow_unknown_labels:
                        raise DatasetFormatError(str(path), line_no, f'unknown label {token!r}')
                    skipped += 1
                    continue
                ids.append(label_id)
            label_ids.append(ids)
        if skipped:
            logger.warning(f'{path}: skipped {skipped} labels missing from the vocabulary')
        return label_ids, vocab

    all_tokens = [token for _, tokens, _ in rows for token in tokens]
    declared_labels = header[2] if header else None

    if all(token.isdigit() for token in all_tokens):
        # integer labels are ids themselves
        max_id = max((int(token) for token in all_tokens), default=-1)
        if declared_labels is not None:
            if max_id >= declared_labels:
                line_no = next(n for n, toks, _ in rows
                               if any(int(t) >= declared_labels for t in toks))
                raise DatasetFormatError(
                    str(path), line_no,
                    f'label id >= declared num_labels {declared_labels}'
                )
            num_labels = declared_labels
        else:
            num_labels = max_id + 1
        if num_labels <= 0:
            raise DatasetFormatError(str(path), None, 'dataset declares no labels')
        vocab = LabelVocabulary.from_range(num_labels)
        return [[int(token) for token in tokens] for _, tokens, _ in rows], vocab

    names: Dict[str, int] = {}
    for token in all_tokens:
        if token not in names:
            names[token] = len(names)
    try:
        vocab = LabelVocabulary(names)
    except ValueError as e:
        raise DatasetFormatError(str(path), None, str(e)) from e
    return [[names[token] for token in tokens] for _, tokens, _ in rows], vocab


def _format_value(value: float) -> str:
    text = repr(float(value))
    return text[:-2] if text.endswith('.0') else text


def save_dataset(ds: MultiLabelDataset, path: PathLike, write_header: bool = True) -> None:
    """
    Write a dataset in the same line format load_dataset reads

    Raises:
        ValueError: An instance has neither labels nor features; it would
            be written as a blank line, which the loader skips
    """
    blank = [i for i, inst in enumerate(ds.instances) if not inst.labels and not inst.features]
    if blank:
        raise ValueError(f'Instances without labels or features cannot be written: {blank[:10]}')

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)

    with open(path, 'w', encoding='utf-8', newline='\n') as f:
        if write_header:
            f.write(f'{len(ds)} {ds.num_features} {ds.num_labels}\n')
        for inst in ds.instances:
            label_field = ','.join(ds.vocab.name_of(l) for l in sorted(inst.labels))
            feature_field = ' '.join(
                f'{fid}:{_format_value(v)}' for fid, v in inst.features
            )
            # an empty label field is written as a leading space
            f.write(f'{label_field} {feature_field}'.rstrip() + '\n')

    logger.info(f'Wrote {len(ds)} instances to {path}')
