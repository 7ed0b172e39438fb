"""
BR vs HOMER Benchmark Harness

Trains the flat BR baseline and one HOMER configuration per (k, nmax) grid
point, evaluates every run on the same test split, and writes:

- report.json: schema-versioned rows with scores, timings and tree stats
- report.md: a table with the columns Method, Micro-F, Macro-F, training
  time (clustering time), prediction time, mean |D_NL| + mean |D_L|, nodes
- sweep_k.csv / sweep_nmax.csv: score series for each swept parameter,
  BR baseline row first
"""

import csv
import json
import logging
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .constants import (
    CLUSTERER_CHOICES,
    DEFAULT_BENCH_SEEDS,
    DEFAULT_BUCKET_BOUNDS,
    DEFAULT_CLUSTERER,
    DEFAULT_ITERATIONS,
    DEFAULT_K,
    DEFAULT_NMAX,
    REPORT_SCHEMA_VERSION,
)
from .dataset import MultiLabelDataset, label_frequencies, load_dataset
from .evaluation import EvaluationReport, evaluate
from .exceptions import ConfigError
from .hierarchy import build_hierarchy
from .inference import predict_dataset, summarize_traversal
from .learner import HomerModel, LearnerParams, train_flat_br, train_homer
from .parallel import parallel_map, resolve_threads

logger = logging.getLogger(__name__)

METHOD_BR = 'BR'
METHOD_HOMER = 'HOMER-BR'

SWEEP_COLUMNS = ['method', 'k', 'nmax', 'micro_f', 'macro_f', 'micro_f_std', 'macro_f_std']


@dataclass
class BenchConfig:
    """A benchmark run: data, parameter grid, seeds and learner settings"""
    train_path: Optional[str] = None
    test_path: Optional[str] = None
    label_names_path: Optional[str] = None
    k_values: List[int] = field(default_factory=lambda: [DEFAULT_K])
    nmax_values: List[int] = field(default_factory=lambda: [DEFAULT_NMAX])
    seeds: List[int] = field(default_factory=lambda: list(DEFAULT_BENCH_SEEDS))
    clusterer: str = DEFAULT_CLUSTERER
    iterations: int = DEFAULT_ITERATIONS
    learner: LearnerParams = field(default_factory=LearnerParams)
    bucket_bounds: List[int] = field(default_factory=lambda: list(DEFAULT_BUCKET_BOUNDS))
    include_br: bool = True
    output_dir: Optional[str] = None
    threads: int = 1

    def validate(self) -> None:
        if any(k < 2 for k in self.k_values):
            raise ConfigError(f'Every k must be >= 2, got {self.k_values}')
        if any(n < 1 for n in self.nmax_values):
            raise ConfigError(f'Every nmax must be >= 1, got {self.nmax_values}')
        if not self.seeds:
            raise ConfigError('At least one seed is required')
        if self.clusterer not in CLUSTERER_CHOICES:
            raise ConfigError(f'Unknown clusterer: {self.clusterer}')
        if self.iterations < 1:
            raise ConfigError(f'iterations must be >= 1, got {self.iterations}')
        if list(self.bucket_bounds) != sorted(set(self.bucket_bounds)):
            raise ConfigError(f'Bucket bounds must be strictly ascending: {self.bucket_bounds}')
        if not self.include_br and not (self.k_values and self.nmax_values):
            raise ConfigError('Benchmark grid is empty')
        self.learner.validate()

    def grid(self) -> List[Tuple[int, int]]:
        return [(k, nmax) for k in self.k_values for nmax in self.nmax_values]

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass
class BenchRow:
    """One method/configuration, averaged over its seeds"""
    method: str
    params: Dict[str, Any]
    micro_f: Optional[float] = None
    macro_f: Optional[float] = None
    micro_f_std: float = 0.0
    macro_f_std: float = 0.0
    train_s: Optional[float] = None
    clustering_s: Optional[float] = None
    predict_s: Optional[float] = None
    nodes: Optional[int] = None
    depth: Optional[int] = None
    mean_Dn_nonleaf: Optional[float] = None
    mean_Dn_leaf: Optional[float] = None
    mean_nodes_visited: Optional[float] = None
    buckets: Dict[str, Dict[str, float]] = field(default_factory=dict)
    per_seed: List[Dict[str, Any]] = field(default_factory=list)
    error: Optional[str] = None

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass
class BenchmarkReport:
    config: BenchConfig
    rows: List[BenchRow] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'schema_version': REPORT_SCHEMA_VERSION,
            'config': self.config.to_dict(),
            'rows': [row.to_dict() for row in self.rows],
        }


@dataclass
class _Run:
    """One trained and evaluated model"""
    seed: Optional[int]
    model: HomerModel
    report: EvaluationReport


def _evaluate_model(model: HomerModel, test: MultiLabelDataset,
                    frequencies: np.ndarray, bounds: Sequence[int],
                    threads: int) -> EvaluationReport:
    started = time.perf_counter()
    predictions = predict_dataset(model, test, threads=threads)
    predict_s = time.perf_counter() - started

    report = evaluate(test.label_sets(), [p.labels for p in predictions],
                      test.num_labels, frequencies, bounds)
    report.train_s = model.telemetry.train_seconds
    report.predict_s = predict_s
    report.traversal = summarize_traversal(model, predictions).to_dict()
    return report


def _aggregate(method: str, params: Dict[str, Any], runs: List[_Run]) -> BenchRow:
    micro = [run.report.micro_f for run in runs]
    macro = [run.report.macro_f for run in runs]
    telemetry = [run.model.telemetry for run in runs]

    bucket_names = dict.fromkeys(name for run in runs for name in run.report.buckets)
    buckets = {}
    for name in bucket_names:
        scores = [run.report.buckets[name] for run in runs if name in run.report.buckets]
        buckets[name] = {
            'num_labels': scores[0].num_labels,
            'micro_f': float(np.mean([s.micro_f for s in scores])),
            'macro_f': float(np.mean([s.macro_f for s in scores])),
        }

    return BenchRow(
        method=method,
        params=params,
        micro_f=float(np.mean(micro)),
        macro_f=float(np.mean(macro)),
        micro_f_std=float(np.std(micro)),
        macro_f_std=float(np.std(macro)),
        train_s=float(np.mean([t.train_seconds for t in telemetry])),
        clustering_s=float(np.mean([t.clustering_seconds for t in telemetry])),
        predict_s=float(np.mean([run.report.predict_s for run in runs])),
        nodes=int(round(np.mean([run.model.num_nodes for run in runs]))),
        depth=int(max(run.model.tree.depth for run in runs)),
        mean_Dn_nonleaf=float(np.mean([t.mean_dn_nonleaf for t in telemetry])),
        mean_Dn_leaf=float(np.mean([t.mean_dn_leaf for t in telemetry])),
        mean_nodes_visited=float(np.mean(
            [run.report.traversal['mean_nodes_visited'] for run in runs]
        )),
        buckets=buckets,
        per_seed=[
            {'seed': run.seed, 'micro_f': run.report.micro_f, 'macro_f': run.report.macro_f}
            for run in runs
        ],
    )


def run_br(config: BenchConfig, train: MultiLabelDataset, test: MultiLabelDataset,
           threads: int = 1) -> BenchRow:
    """Flat BR baseline; training is deterministic, so it runs once"""
    frequencies = label_frequencies(train)
    model = train_flat_br(train, config.learner, threads=threads)
    report = _evaluate_model(model, test, frequencies, config.bucket_bounds, threads)
    return _aggregate(METHOD_BR, {}, [_Run(None, model, report)])


def run_grid_point(config: BenchConfig, train: MultiLabelDataset, test: MultiLabelDataset,
                   k: int, nmax: int, threads: int = 1) -> BenchRow:
    """HOMER at one (k, nmax), replicated over the configured seeds"""
    frequencies = label_frequencies(train)
    params = {'k': k, 'nmax': nmax, 'clusterer': config.clusterer}
    runs = []
    for seed in config.seeds:
        tree = build_hierarchy(train, k=k, nmax=nmax, clusterer=config.clusterer,
                               iterations=config.iterations, seed=seed)
        model = train_homer(train, tree, config.learner, threads=threads)
        report = _evaluate_model(model, test, frequencies, config.bucket_bounds, threads)
        runs.append(_Run(seed, model, report))
        logger.info(f'HOMER k={k} nmax={nmax} seed={seed}: '
                    f'Micro-F {report.micro_f:.5f}, Macro-F {report.macro_f:.5f}')
    return _aggregate(METHOD_HOMER, params, runs)


def _guarded(method: str, params: Dict[str, Any], fn, *args) -> BenchRow:
    try:
        return fn(*args)
    except Exception as e:
        logger.error(f'{method} {params} failed: {e}', exc_info=True)
        return BenchRow(method=method, params=params, error=f'{type(e).__name__}: {e}')


def run_benchmark(config: BenchConfig, train: Optional[MultiLabelDataset] = None,
                  test: Optional[MultiLabelDataset] = None) -> BenchmarkReport:
    """
    Run the BR baseline and every HOMER grid point

    Args:
        config: Benchmark configuration; datasets are loaded from its paths
            unless passed in
        train: Preloaded training split
        test: Preloaded test split sharing the training vocabulary

    Returns:
        BenchmarkReport; also written to config.output_dir when set
    """
    config.validate()
    if train is None:
        if not config.train_path:
            raise ConfigError('Benchmark needs a training file')
        train = load_dataset(config.train_path, label_names_path=config.label_names_path)
    if test is None:
        if not config.test_path:
            raise ConfigError('Benchmark needs a test file')
        test = load_dataset(config.test_path, vocab=train.vocab, allow_unknown_labels=True)

    threads = resolve_threads(config.threads)
    grid = config.grid()

    logger.info('=' * 60)
    logger.info(f'Benchmark: {len(train)} train / {len(test)} test instances, '
                f'{train.num_labels} labels, {len(grid)} HOMER grid points, '
                f'seeds {config.seeds}')
    logger.info('=' * 60)

    # grid points run side by side; each fits its own models sequentially
    inner = 1 if len(grid) > 1 else threads
    tasks = []
    if config.include_br:
        tasks.append((METHOD_BR, {}, run_br, (config, train, test, inner)))
    for k, nmax in grid:
        params = {'k': k, 'nmax': nmax, 'clusterer': config.clusterer}
        tasks.append((METHOD_HOMER, params, run_grid_point,
                      (config, train, test, k, nmax, inner)))

    def run_task(task) -> BenchRow:
        method, params, fn, args = task
        return _guarded(method, params, fn, *args)

    rows = parallel_map(run_task, tasks, threads)
    report = BenchmarkReport(config, rows)

    if config.output_dir:
        write_reports(report, config.output_dir)
    return report


def _fmt(value: Optional[float], digits: int = 5) -> str:
    return '-' if value is None else f'{value:.{digits}f}'


def render_markdown(report: BenchmarkReport) -> str:
    """Results table, one row per method/configuration"""
    lines = [
        '| Method | Params | Micro-F | Macro-F | Training (s) (clustering) | Prediction (s) '
        '| D_NL + D_L | Nodes |',
        '|---|---|---|---|---|---|---|---|',
    ]
    for row in report.rows:
        params = ', '.join(f'{k}={v}' for k, v in row.params.items()) or '-'
        if row.error:
            lines.append(f'| {row.method} | {params} | error: {row.error} | | | | | |')
            continue
        lines.append(
            f'| {row.method} | {params} | {_fmt(row.micro_f)} | {_fmt(row.macro_f)} '
            f'| {_fmt(row.train_s, 2)} ({_fmt(row.clustering_s, 2)}) | {_fmt(row.predict_s, 2)} '
            f'| {_fmt(row.mean_Dn_nonleaf, 1)} + {_fmt(row.mean_Dn_leaf, 1)} | {row.nodes} |'
        )
    return '\n'.join(lines) + '\n'


def sweep_rows(report: BenchmarkReport, parameter: str) -> List[Dict[str, Any]]:
    """CSV rows for one swept parameter ('k' or 'nmax'), BR first"""
    rows = [row for row in report.rows if not row.error]
    ordered = [r for r in rows if r.method == METHOD_BR] + sorted(
        (r for r in rows if r.method != METHOD_BR),
        key=lambda r: (r.params[parameter], r.params['k'], r.params['nmax']),
    )
    return [
        {
            'method': r.method,
            'k': r.params.get('k', ''),
            'nmax': r.params.get('nmax', ''),
            'micro_f': repr(r.micro_f),
            'macro_f': repr(r.macro_f),
            'micro_f_std': repr(r.micro_f_std),
            'macro_f_std': repr(r.macro_f_std),
        }
        for r in ordered
    ]


def _write_csv(path: Path, rows: List[Dict[str, Any]]) -> None:
    with open(path, 'w', encoding='utf-8', newline='') as f:
        writer = csv.DictWriter(f, fieldnames=SWEEP_COLUMNS, lineterminator='\n')
        writer.writeheader()
        writer.writerows(rows)


def write_reports(report: BenchmarkReport, output_dir: str) -> Dict[str, Path]:
    """Write report.json, report.md and the sweep CSVs; returns the paths written"""
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = {
        'json': out / 'report.json',
        'markdown': out / 'report.md',
    }

    with open(written['json'], 'w', encoding='utf-8') as f:
        json.dump(report.to_dict(), f, indent=2)
        f.write('\n')
    written['markdown'].write_text(render_markdown(report), encoding='utf-8')

    if len(report.config.k_values) > 1:
        written['sweep_k'] = out / 'sweep_k.csv'
        _write_csv(written['sweep_k'], sweep_rows(report, 'k'))
    if len(report.config.nmax_values) > 1:
        written['sweep_nmax'] = out / 'sweep_nmax.csv'
        _write_csv(written['sweep_nmax'], sweep_rows(report, 'nmax'))

    for kind, path in written.items():
        logger.info(f'Wrote {kind} report: {path}')
    return written
