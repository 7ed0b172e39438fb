"""Tests for YAML configuration loading and flag merging"""

from pathlib import Path

import pytest

from homer.config_manager import ConfigManager
from homer.exceptions import ConfigError


def load(write_file, text):
    manager = ConfigManager(str(write_file('homer.yaml', text)))
    return manager, manager.load_config()


def test_shipped_config_loads():
    manager = ConfigManager()
    assert manager.load_config()

    params = manager.get_hierarchy_params()
    assert (params.k, params.nmax, params.iterations) == (3, 20, 3)
    assert manager.get_learner_params().l2 == pytest.approx(1e-4)
    assert manager.get_bucket_bounds() == [70, 700]
    assert manager.get_data_path('train') is None


def test_missing_file_fails_softly(tmp_path):
    assert not ConfigManager(str(tmp_path / 'absent.yaml')).load_config()


@pytest.mark.parametrize('text', [
    'hierarchy: [1, 2]\n',
    'hierarchy:\n  k: 1\n',
    'hierarchy:\n  nmax: 0\n',
    'hierarchy:\n  k: three\n',
    'hierarchy:\n  clusterer: spectral\n',
    'learner:\n  loss: perceptron\n',
    'learner:\n  l2: -0.5\n',
    'inference:\n  mode: probabilities\n',
    'inference:\n  top: 0\n',
    'inference:\n  prune: maybe\n',
    'evaluation:\n  bucket_bounds: [700, 70]\n',
    'bench:\n  k_values: [2, x]\n',
    '- just\n- a list\n',
    'hierarchy: {k: 3\n',
])
def test_invalid_values_are_rejected(write_file, text):
    _, ok = load(write_file, text)
    assert not ok


def test_flags_override_the_file(write_file):
    manager, ok = load(write_file, 'hierarchy:\n  k: 4\n  nmax: 8\nlearner:\n  epochs: 50\n')
    assert ok

    run = manager.build_run_config({'k': None, 'nmax': 12, 'epochs': None, 'seed': 9})
    assert run.hierarchy.k == 4
    assert run.hierarchy.nmax == 12
    assert run.hierarchy.seed == 9
    assert run.learner.epochs == 50


def test_run_config_validation_after_merge(write_file):
    manager, _ = load(write_file, 'hierarchy:\n  k: 3\n')
    with pytest.raises(ConfigError):
        manager.build_run_config({'k': 1})
    with pytest.raises(ConfigError):
        manager.build_run_config({'top': 0})

    # flat BR ignores hierarchy settings
    assert manager.build_run_config({'k': 1, 'flat_br': True}).flat_br


def test_relative_data_paths_resolve_against_the_config_file(write_file, tmp_path):
    manager, ok = load(write_file, 'data:\n  train: data/train.txt\n  test: /abs/test.txt\n')
    assert ok
    assert Path(manager.get_data_path('train')) == tmp_path / 'data' / 'train.txt'
    assert manager.get_data_path('test') == '/abs/test.txt'
    assert manager.build_run_config().train_path == str(tmp_path / 'data' / 'train.txt')


def test_unknown_keys_are_ignored(write_file, caplog):
    manager, ok = load(write_file, 'hierarchy:\n  k: 5\n  depth: 2\n')
    assert ok
    assert manager.get_hierarchy_params().k == 5
    assert 'depth' in caplog.text


def test_bench_config_from_file(write_file):
    manager, ok = load(write_file, (
        'hierarchy:\n  nmax: 6\n'
        'bench:\n  k_values: [2, 5]\n  seeds: [4]\n  include_br: false\n'
    ))
    assert ok

    bench = manager.build_bench_config({'threads': 2})
    assert bench.grid() == [(2, 6), (5, 6)]
    assert bench.seeds == [4]
    assert not bench.include_br
    assert bench.threads == 2

    with pytest.raises(ConfigError):
        manager.build_bench_config({'k_values': [1]})
