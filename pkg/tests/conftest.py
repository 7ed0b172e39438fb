"""Shared fixtures for the HOMER test suites"""

import os
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent.parent))

from homer.dataset import LabelVocabulary, MultiLabelDataset, SparseInstance  # noqa: E402

BIBTEX_ENV_VAR = 'HOMER_BIBTEX_DIR'


def make_dataset(rows, num_labels, num_features):
    """rows: list of (label ids, [(feature id, value), ...])"""
    instances = [SparseInstance.from_pairs(pairs, labels) for labels, pairs in rows]
    return MultiLabelDataset(LabelVocabulary.from_range(num_labels), instances, num_features)


@pytest.fixture
def toy_dataset():
    """Six instances, four labels, six features; label 3 never occurs"""
    rows = [
        ({0}, [(0, 1.0), (1, 0.5)]),
        ({0, 1}, [(0, 1.0), (2, 1.0)]),
        ({1}, [(2, 1.0), (3, 0.25)]),
        ({2}, [(4, 1.0)]),
        ({2, 0}, [(4, 1.0), (0, 2.0)]),
        ({1, 2}, [(3, 1.0), (5, 1.0)]),
    ]
    return make_dataset(rows, 4, 6)


@pytest.fixture
def grouped_dataset():
    """Nine labels in three groups; each group's instances carry all of its labels"""
    rows = []
    for group in range(3):
        labels = {3 * group, 3 * group + 1, 3 * group + 2}
        for i in range(10):
            rows.append((labels, [(2 * group, 1.0), (2 * group + 1, 0.5 + 0.05 * i)]))
    return make_dataset(rows, 9, 6)


@pytest.fixture
def write_file(tmp_path):
    def write(name, text):
        path = tmp_path / name
        path.write_text(text, encoding='utf-8')
        return path
    return write


@pytest.fixture(scope='session')
def bibtex_dir():
    directory = os.getenv(BIBTEX_ENV_VAR)
    if not directory:
        pytest.skip(f'{BIBTEX_ENV_VAR} is not set')
    path = Path(directory)
    if not (path / 'bibtex_train.txt').exists() or not (path / 'bibtex_test.txt').exists():
        pytest.skip(f'{path} lacks bibtex_train.txt / bibtex_test.txt')
    return path
