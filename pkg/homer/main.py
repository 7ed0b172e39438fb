"""
Command-line entry point for the HOMER toolkit

Subcommands: train, predict, evaluate, inspect, inspect-tree, cluster, bench.
Logs go to stderr (and optionally a rotating log file); reports and
inspection output go to stdout or the requested output file.
"""

import argparse
import json
import logging
import os
import sys
import time
from logging.handlers import RotatingFileHandler
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Set, Tuple

from dotenv import load_dotenv

from .benchmark import render_markdown, run_benchmark
from .clustering import build_label_vectors, make_clusterer
from .config_manager import ConfigManager, RunConfig
from .constants import (
    CLUSTERER_CHOICES,
    DECISION_THRESHOLD,
    DEFAULT_CLUSTERER,
    DEFAULT_ITERATIONS,
    DEFAULT_K,
    DEFAULT_LOG_LEVEL,
    DEFAULT_MODE,
    DEFAULT_PRUNE,
    DEFAULT_SEED,
    DEFAULT_TOP_R,
    EXIT_INTERNAL,
    EXIT_MISMATCH,
    EXIT_OK,
    EXIT_USAGE,
    LOG_BACKUP_COUNT,
    LOG_FORMAT,
    LOG_LEVEL_ENV_VAR,
    LOG_MAX_BYTES,
    LOSS_CHOICES,
    MODE_CHOICES,
    REPORT_SCHEMA_VERSION,
)
from .dataset import (
    LabelVocabulary,
    MultiLabelDataset,
    compute_stats,
    label_frequencies,
    load_dataset,
    load_label_names,
    vocab_hash,
)
from .evaluation import evaluate
from .exceptions import (
    ConfigError,
    DatasetFormatError,
    ModelDataMismatchError,
    ModelFormatError,
)
from .hierarchy import build_hierarchy, node_training_set
from .inference import Prediction, predict_dataset, summarize_traversal
from .learner import train_flat_br, train_homer
from .parallel import resolve_threads
from .persistence import check_compatibility, load_model, save_model

logger = logging.getLogger(__name__)

LOG_LEVELS = ['DEBUG', 'INFO', 'WARNING', 'ERROR', 'CRITICAL']


def setup_logging(level: Optional[str] = None, log_file: Optional[str] = None) -> None:
    """Configure root logging once per invocation"""
    load_dotenv()
    level = (level or os.getenv(LOG_LEVEL_ENV_VAR) or DEFAULT_LOG_LEVEL).upper()
    if level not in LOG_LEVELS:
        raise ConfigError(f'Invalid log level: {level}')

    handlers: List[logging.Handler] = [logging.StreamHandler(sys.stderr)]
    if log_file:
        Path(log_file).parent.mkdir(parents=True, exist_ok=True)
        handlers.append(RotatingFileHandler(log_file, maxBytes=LOG_MAX_BYTES,
                                            backupCount=LOG_BACKUP_COUNT))
    logging.basicConfig(level=getattr(logging, level), format=LOG_FORMAT,
                        handlers=handlers, force=True)


def _write_text(text: str, output: Optional[str]) -> None:
    if output:
        path = Path(output)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding='utf-8')
        logger.info(f'Wrote {path}')
    else:
        sys.stdout.write(text)


def _dump_json(data: Dict[str, Any], output: Optional[str] = None) -> None:
    _write_text(json.dumps(data, indent=2) + '\n', output)


def _config_manager(config_path: Optional[str]) -> ConfigManager:
    manager = ConfigManager(config_path)
    if config_path is not None and not manager.load_config():
        raise ConfigError(f'Invalid configuration file: {config_path}')
    return manager


def _require(value: Optional[str], message: str) -> None:
    if not value:
        raise ConfigError(message)


def _run_config(args: argparse.Namespace) -> RunConfig:
    overrides = {
        'command': args.command,
        'train_path': getattr(args, 'train', None),
        'test_path': getattr(args, 'test', None) or getattr(args, 'truth', None),
        'labels_path': getattr(args, 'labels', None),
        'model_path': getattr(args, 'model', None),
        'output_path': getattr(args, 'output', None),
        'predictions_path': getattr(args, 'predictions', None),
        'mode': getattr(args, 'mode', None),
        'top': getattr(args, 'top', None),
        'prune': getattr(args, 'prune', None),
        'omit_zeros': getattr(args, 'omit_zeros', None) or None,
        'bucket_bounds': getattr(args, 'bucket_bounds', None),
        'k': getattr(args, 'k', None),
        'nmax': getattr(args, 'nmax', None),
        'iterations': getattr(args, 'iterations', None),
        'seed': getattr(args, 'seed', None),
        'clusterer': getattr(args, 'clusterer', None),
        'l2': getattr(args, 'l2', None),
        'epochs': getattr(args, 'epochs', None),
        'loss': getattr(args, 'loss', None),
        'threads': getattr(args, 'threads', None),
        'cache_node_data': getattr(args, 'cache_node_data', None) or None,
        'flat_br': getattr(args, 'flat_br', None) or None,
    }
    return _config_manager(getattr(args, 'config', None)).build_run_config(overrides)


def cmd_train(args: argparse.Namespace) -> int:
    """Build the hierarchy, train every node and save the model"""
    run = _run_config(args)
    _require(run.train_path, 'train needs --train (or data.train in the config file)')
    _require(run.model_path, 'train needs --model')

    threads = resolve_threads(run.threads)
    logger.info('=' * 60)
    logger.info(f'Training {"flat BR" if run.flat_br else "HOMER"} on {run.train_path}')
    logger.info('=' * 60)

    train = load_dataset(run.train_path, label_names_path=run.labels_path)
    if run.flat_br:
        model = train_flat_br(train, run.learner, threads=threads)
    else:
        h = run.hierarchy
        tree = build_hierarchy(train, k=h.k, nmax=h.nmax, clusterer=h.clusterer,
                               iterations=h.iterations, seed=h.seed)
        model = train_homer(train, tree, run.learner, threads=threads,
                            cache_node_data=run.cache_node_data)

    telemetry = model.telemetry
    logger.info(
        f'Trained {model.num_nodes} nodes in {telemetry.train_seconds:.2f}s '
        f'(clustering {telemetry.clustering_seconds:.2f}s); mean |D_n| '
        f'{telemetry.mean_dn_nonleaf:.1f} non-leaf + {telemetry.mean_dn_leaf:.1f} leaf'
    )
    save_model(model, run.model_path)
    return EXIT_OK


def format_prediction(prediction: Prediction, vocab: LabelVocabulary, mode: str,
                      top: int) -> str:
    """One output line: `lab1,lab2` or `lab:score lab:score ...`"""
    if mode == 'bipartition':
        return ','.join(vocab.name_of(l) for l in sorted(prediction.labels))
    return ' '.join(f'{vocab.name_of(l)}:{s!r}' for l, s in prediction.top(top))


def cmd_predict(args: argparse.Namespace) -> int:
    """Predict every test instance, one line per instance in input order"""
    run = _run_config(args)
    _require(run.model_path, 'predict needs --model')
    _require(run.test_path, 'predict needs --test (or data.test in the config file)')
    _require(run.output_path, 'predict needs --output')

    model = load_model(run.model_path)
    if run.labels_path:
        sidecar = load_label_names(run.labels_path)
        if vocab_hash(sidecar) != vocab_hash(model.vocab):
            raise ModelDataMismatchError(f'{run.labels_path} does not match the model vocabulary')

    test = load_dataset(run.test_path, vocab=model.vocab, allow_unknown_labels=True)
    check_compatibility(model, test)

    started = time.perf_counter()
    predictions = predict_dataset(model, test, mode=run.mode, prune=run.prune,
                                  omit_zeros=run.omit_zeros,
                                  threads=resolve_threads(run.threads))
    elapsed = time.perf_counter() - started

    lines = [format_prediction(p, model.vocab, run.mode, run.top) for p in predictions]
    _write_text(''.join(line + '\n' for line in lines), run.output_path)

    if run.mode == 'bipartition' and predictions:
        stats = summarize_traversal(model, predictions)
        logger.info(f'Mean nodes visited {stats.mean_nodes_visited:.2f} of {stats.total_nodes}')
    logger.info(f'Predicted {len(predictions)} instances in {elapsed:.2f}s')
    return EXIT_OK


def _ranked_token(token: str) -> Optional[Tuple[str, float]]:
    name, sep, raw_score = token.rpartition(':')
    if not sep or not name:
        return None
    try:
        return name, float(raw_score)
    except ValueError:
        return None


def parse_prediction_line(path: str, line_no: int, line: str,
                          vocab: LabelVocabulary, unknown_hint: str = '') -> Set[int]:
    """
    Parse one prediction line of either output mode

    Ranking lines (`lab:score ...`) keep the labels scoring >= 0.5.
    `unknown_hint` is appended to the error for a label outside the vocabulary.
    """
    tokens = line.split()
    if not tokens:
        return set()

    ranked = [_ranked_token(token) for token in tokens]
    is_ranking = len(tokens) > 1 or (ranked[0] is not None and vocab.resolve(tokens[0]) is None)
    if is_ranking and any(r is None for r in ranked):
        raise DatasetFormatError(path, line_no, f'expected label:score tokens, got {line!r}')

    if is_ranking:
        names = [name for name, s in ranked if s >= DECISION_THRESHOLD]
    else:
        names = [name for name in tokens[0].split(',') if name]

    labels = set()
    for name in names:
        label_id = vocab.resolve(name)
        if label_id is None:
            raise DatasetFormatError(path, line_no, f'unknown label {name!r}{unknown_hint}')
        labels.add(label_id)
    return labels


def load_predictions(path: str, vocab: LabelVocabulary,
                     unknown_hint: str = '') -> List[Set[int]]:
    if not Path(path).exists():
        raise FileNotFoundError(f'Predictions file not found: {path}')
    with open(path, 'r', encoding='utf-8') as f:
        return [parse_prediction_line(path, line_no, raw.rstrip('\r\n'), vocab, unknown_hint)
                for line_no, raw in enumerate(f, start=1)]


def cmd_evaluate(args: argparse.Namespace) -> int:
    """
    Score a predictions file against the truth file

    Scores average over the label set of the model, a label sidecar or the
    training file, in that order; with none of them, over the truth file's.
    """
    run = _run_config(args)
    _require(run.test_path, 'evaluate needs --truth (or data.test in the config file)')
    _require(run.predictions_path, 'evaluate needs --predictions')

    train: Optional[MultiLabelDataset] = None
    vocab: Optional[LabelVocabulary] = None
    if run.model_path:
        vocab = load_model(run.model_path).vocab
    elif run.labels_path:
        vocab = load_label_names(run.labels_path)
    elif run.train_path:
        train = load_dataset(run.train_path)
        vocab = train.vocab

    hint = ''
    if vocab is None:
        truth = load_dataset(run.test_path)
        hint = ' (labels come from the truth file; pass --model, --labels or --train)'
    else:
        truth = load_dataset(run.test_path, vocab=vocab, allow_unknown_labels=True)

    predicted = load_predictions(run.predictions_path, truth.vocab, hint)
    if len(predicted) != len(truth):
        raise DatasetFormatError(
            run.predictions_path, None,
            f'{len(predicted)} prediction lines for {len(truth)} truth instances'
        )

    frequencies = None
    if run.train_path:
        if train is None:
            train = load_dataset(run.train_path, vocab=truth.vocab, allow_unknown_labels=True)
        frequencies = label_frequencies(train)

    report = evaluate(truth.label_sets(), predicted, truth.num_labels, frequencies,
                      run.bucket_bounds)
    data = {'schema_version': REPORT_SCHEMA_VERSION}
    data.update(report.to_dict())
    data.pop('traversal')
    _dump_json(data, run.output_path)
    return EXIT_OK


def cmd_inspect(args: argparse.Namespace) -> int:
    """Dataset statistics"""
    ds = load_dataset(args.data, label_names_path=args.labels)
    stats = compute_stats(ds).to_dict()
    stats['labels'] = list(ds.vocab.labels)
    _dump_json(stats)
    return EXIT_OK


def cmd_inspect_tree(args: argparse.Namespace) -> int:
    """Tree structure and training telemetry of a saved model"""
    model = load_model(args.model)
    data = model.tree.to_dict(model.vocab)
    data['method'] = model.method
    data['telemetry'] = model.telemetry.to_dict(include_timing=False)

    if args.train:
        ds = load_dataset(args.train, vocab=model.vocab, allow_unknown_labels=True)
        for entry, node in zip(data['nodes'], model.tree.nodes):
            entry['num_data'] = len(node_training_set(node, ds))
    _dump_json(data)
    return EXIT_OK


def cmd_cluster(args: argparse.Namespace) -> int:
    """Cluster every label of a dataset once and report the partition"""
    ds = load_dataset(args.data)
    points = build_label_vectors(ds)
    clusterer = make_clusterer(args.clusterer, args.iterations)

    started = time.perf_counter()
    clustering = clusterer.cluster(points, args.k, args.seed)
    elapsed = time.perf_counter() - started

    data: Dict[str, Any] = {
        'k': clustering.k,
        'sizes': clustering.sizes(),
        'total_evictions': clustering.total_evictions,
        'longest_cascade': clustering.longest_cascade,
        'max_point_evictions': clustering.max_point_evictions,
        'seconds': elapsed,
    }
    if args.dump:
        data['clusters'] = [[ds.vocab.name_of(l) for l in cluster]
                            for cluster in clustering.to_json()]
    _dump_json(data)
    return EXIT_OK


def cmd_bench(args: argparse.Namespace) -> int:
    """Run the BR vs HOMER grid from a config file"""
    manager = _config_manager(args.config)
    config = manager.build_bench_config({'output_dir': args.output_dir,
                                         'threads': args.threads})
    if not config.output_dir:
        config.output_dir = 'bench_results'

    report = run_benchmark(config)
    sys.stdout.write(render_markdown(report))
    failed = [row for row in report.rows if row.error]
    if failed:
        logger.warning(f'{len(failed)} benchmark rows failed; see report.json')
    return EXIT_OK


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument('--log-level', type=str.upper, default=None, choices=LOG_LEVELS,
                        help=f'Logging level (default: ${LOG_LEVEL_ENV_VAR} or INFO)')
    parser.add_argument('--log-file', type=str, default=None,
                        help='Also log to this rotating file')


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='homer',
        description='HOMER - hierarchical multi-label classification over clustered label trees'
    )
    sub = parser.add_subparsers(dest='command', required=True)

    train = sub.add_parser('train', help='Build the label tree and train a model')
    train.add_argument('--train', type=str, help='Training data file')
    train.add_argument('--labels', type=str, help='Label name sidecar file')
    train.add_argument('--model', type=str, help='Output model file')
    train.add_argument('--config', type=str, default=None, help='YAML configuration file')
    train.add_argument('--k', type=int, help='Children per split')
    train.add_argument('--nmax', type=int, help='Maximum labels per leaf')
    train.add_argument('--iterations', type=int, help='Clustering passes')
    train.add_argument('--seed', type=int, help='Clustering seed')
    train.add_argument('--clusterer', choices=CLUSTERER_CHOICES)
    train.add_argument('--l2', type=float, help='L2 regularization strength')
    train.add_argument('--epochs', type=int, help='Optimizer iteration budget')
    train.add_argument('--loss', choices=LOSS_CHOICES)
    train.add_argument('--threads', type=int)
    train.add_argument('--cache-node-data', action='store_true',
                       help="Filter each node's D_n from its parent's")
    train.add_argument('--flat-br', action='store_true',
                       help='Train flat binary relevance instead of HOMER')
    train.set_defaults(handler=cmd_train)

    predict = sub.add_parser('predict', help='Predict a test file with a saved model')
    predict.add_argument('--model', type=str, help='Trained model file')
    predict.add_argument('--test', type=str, help='Test data file')
    predict.add_argument('--output', type=str, help='Predictions file to write')
    predict.add_argument('--config', type=str, default=None, help='YAML configuration file')
    predict.add_argument('--labels', type=str, help='Label name sidecar to check against the model')
    predict.add_argument('--mode', choices=MODE_CHOICES,
                         help=f'Output mode (default: {DEFAULT_MODE})')
    predict.add_argument('--top', type=int,
                         help=f'Labels per line in ranking mode (default: {DEFAULT_TOP_R})')
    predict.add_argument('--prune', action=argparse.BooleanOptionalAction, default=None,
                         help=f'Prune low-scoring paths in ranking mode (default: {DEFAULT_PRUNE})')
    predict.add_argument('--omit-zeros', action='store_true')
    predict.add_argument('--threads', type=int)
    predict.set_defaults(handler=cmd_predict)

    ev = sub.add_parser('evaluate', help='Score predictions against the truth')
    ev.add_argument('--truth', type=str, help='Data file with the true labels')
    ev.add_argument('--predictions', type=str, help='Output of predict')
    ev.add_argument('--config', type=str, default=None, help='YAML configuration file')
    ev.add_argument('--model', type=str, help='Model whose vocabulary the files use')
    ev.add_argument('--labels', type=str, help='Label name sidecar giving the full label set')
    ev.add_argument('--train', type=str, help='Training file for frequency buckets')
    ev.add_argument('--bucket-bounds', type=int, nargs='*',
                    help='Ascending training-frequency bounds between buckets (default: 70 700)')
    ev.add_argument('--output', type=str)
    ev.set_defaults(handler=cmd_evaluate)

    inspect = sub.add_parser('inspect', help='Dataset statistics')
    inspect.add_argument('--data', required=True)
    inspect.add_argument('--labels', type=str)
    inspect.set_defaults(handler=cmd_inspect)

    tree = sub.add_parser('inspect-tree', help='Show the label tree of a model')
    tree.add_argument('--model', required=True)
    tree.add_argument('--train', type=str, help='Count each node\'s instances in this file')
    tree.set_defaults(handler=cmd_inspect_tree)

    cluster = sub.add_parser('cluster', help='Cluster the labels of a dataset once')
    cluster.add_argument('--data', required=True)
    cluster.add_argument('--k', type=int, default=DEFAULT_K)
    cluster.add_argument('--iterations', type=int, default=DEFAULT_ITERATIONS)
    cluster.add_argument('--seed', type=int, default=DEFAULT_SEED)
    cluster.add_argument('--clusterer', choices=CLUSTERER_CHOICES, default=DEFAULT_CLUSTERER)
    cluster.add_argument('--dump', action='store_true', help='Include the partition')
    cluster.set_defaults(handler=cmd_cluster)

    bench = sub.add_parser('bench', help='BR vs HOMER benchmark grid')
    bench.add_argument('--config', required=True)
    bench.add_argument('--output-dir', type=str)
    bench.add_argument('--threads', type=int)
    bench.set_defaults(handler=cmd_bench)

    for command in (train, predict, ev, inspect, tree, cluster, bench):
        _add_common(command)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Main entry point; returns the process exit code"""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code in (0, None) else EXIT_USAGE

    try:
        setup_logging(args.log_level, args.log_file)
        return args.handler(args)

    except ModelDataMismatchError as e:
        logger.error(f'Model/data mismatch: {e}')
        return EXIT_MISMATCH

    except (ConfigError, DatasetFormatError, ModelFormatError, FileNotFoundError) as e:
        logger.error(str(e))
        return EXIT_USAGE

    except Exception as e:
        logger.error(f'{args.command} failed: {e}', exc_info=True)
        return EXIT_INTERNAL


if __name__ == '__main__':
    sys.exit(main())
