"""
Configuration Manager for the HOMER toolkit

Loads and validates run / benchmark settings from a YAML file and merges
them with command-line flags: a flag that was given wins over the file,
and the file wins over the defaults in constants.py.
"""

import logging
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, List, Optional

import yaml

from .benchmark import BenchConfig
from .constants import (
    CLUSTERER_CHOICES,
    DEFAULT_BUCKET_BOUNDS,
    DEFAULT_MODE,
    DEFAULT_PRUNE,
    DEFAULT_TOP_R,
    LOSS_CHOICES,
    MODE_CHOICES,
)
from .exceptions import ConfigError
from .hierarchy import HierarchyParams
from .learner import LearnerParams

logger = logging.getLogger(__name__)

SECTIONS = ('data', 'hierarchy', 'learner', 'inference', 'evaluation', 'bench')


@dataclass
class RunConfig:
    """Everything one CLI command needs, after merging flags, file and defaults"""
    command: str = ''
    train_path: Optional[str] = None
    test_path: Optional[str] = None
    labels_path: Optional[str] = None
    model_path: Optional[str] = None
    output_path: Optional[str] = None
    predictions_path: Optional[str] = None
    hierarchy: HierarchyParams = field(default_factory=HierarchyParams)
    learner: LearnerParams = field(default_factory=LearnerParams)
    mode: str = DEFAULT_MODE
    top: int = DEFAULT_TOP_R
    prune: bool = DEFAULT_PRUNE
    omit_zeros: bool = False
    bucket_bounds: List[int] = field(default_factory=lambda: list(DEFAULT_BUCKET_BOUNDS))
    threads: Optional[int] = None
    cache_node_data: bool = False
    flat_br: bool = False

    def validate(self) -> None:
        if not self.flat_br:
            self.hierarchy.validate()
        self.learner.validate()
        if self.mode not in MODE_CHOICES:
            raise ConfigError(f'Unknown mode {self.mode!r}; choose from {", ".join(MODE_CHOICES)}')
        if self.top < 1:
            raise ConfigError(f'top must be >= 1, got {self.top}')
        if list(self.bucket_bounds) != sorted(set(self.bucket_bounds)):
            raise ConfigError(f'Bucket bounds must be strictly ascending: {self.bucket_bounds}')
        if self.threads is not None and self.threads < 1:
            raise ConfigError(f'threads must be >= 1, got {self.threads}')


class ConfigManager:
    """Manages run and benchmark configuration"""

    def __init__(self, config_path: Optional[str] = None):
        """
        Initialize configuration manager

        Args:
            config_path: Path to configuration file (defaults to config/homer_config.yaml)
        """
        if config_path is None:
            project_root = Path(__file__).parent.parent
            config_path = project_root / 'config' / 'homer_config.yaml'

        self.config_path = Path(config_path)
        self.config: Dict[str, Any] = {}

    def load_config(self) -> bool:
        """
        Load configuration from YAML file

        Returns:
            True if successful, False otherwise
        """
        try:
            if not self.config_path.exists():
                logger.error(f'Configuration file not found: {self.config_path}')
                return False

            with open(self.config_path, 'r', encoding='utf-8') as f:
                self.config = yaml.safe_load(f) or {}

            if not isinstance(self.config, dict):
                logger.error(f'Configuration root must be a mapping: {self.config_path}')
                self.config = {}
                return False

            logger.info(f'Configuration loaded from {self.config_path}')
            return self.validate_config()

        except yaml.YAMLError as e:
            logger.error(f'Failed to parse YAML configuration: {e}')
            return False

        except OSError as e:
            logger.error(f'Failed to load configuration: {e}')
            return False

    def validate_config(self) -> bool:
        """
        Validate configuration structure and values

        Returns:
            True if valid, False otherwise
        """
        valid = True

        for section in self.config:
            if section not in SECTIONS:
                logger.warning(f'Unknown configuration section: {section}')
        for section in SECTIONS:
            if not isinstance(self.config.get(section) or {}, dict):
                logger.error(f'Section {section} must be a mapping')
                valid = False
        if not valid:
            return False

        hierarchy = self.get_section('hierarchy')
        for key in ('k', 'nmax', 'iterations'):
            value = hierarchy.get(key)
            if value is not None and (not isinstance(value, int) or value < 1):
                logger.error(f'Invalid hierarchy.{key}: {value} (must be a positive integer)')
                valid = False
        if hierarchy.get('k') == 1:
            logger.error('Invalid hierarchy.k: 1 (must be >= 2)')
            valid = False
        if hierarchy.get('clusterer', CLUSTERER_CHOICES[0]) not in CLUSTERER_CHOICES:
            logger.error(f'Invalid hierarchy.clusterer: {hierarchy["clusterer"]}')
            valid = False

        learner = self.get_section('learner')
        if learner.get('loss', LOSS_CHOICES[0]) not in LOSS_CHOICES:
            logger.error(f'Invalid learner.loss: {learner["loss"]}')
            valid = False
        l2 = learner.get('l2', 0.0)
        if not isinstance(l2, (int, float)) or l2 < 0:
            logger.error(f'Invalid learner.l2: {l2} (must be >= 0)')
            valid = False

        inference = self.get_section('inference')
        if inference.get('mode', MODE_CHOICES[0]) not in MODE_CHOICES:
            logger.error(f'Invalid inference.mode: {inference["mode"]}')
            valid = False
        top = inference.get('top', DEFAULT_TOP_R)
        if not isinstance(top, int) or isinstance(top, bool) or top < 1:
            logger.error(f'Invalid inference.top: {top} (must be a positive integer)')
            valid = False
        for key in ('prune', 'omit_zeros'):
            if not isinstance(inference.get(key, False), bool):
                logger.error(f'Invalid inference.{key}: {inference[key]} (must be true or false)')
                valid = False

        bounds = self.get_section('evaluation').get('bucket_bounds', list(DEFAULT_BUCKET_BOUNDS))
        if not isinstance(bounds, list) or bounds != sorted(set(bounds)):
            logger.error(f'Invalid evaluation.bucket_bounds: {bounds} (must ascend strictly)')
            valid = False

        bench = self.get_section('bench')
        for key in ('k_values', 'nmax_values', 'seeds'):
            value = bench.get(key)
            if value is not None and not (isinstance(value, list)
                                          and all(isinstance(v, int) for v in value)):
                logger.error(f'Invalid bench.{key}: {value} (must be a list of integers)')
                valid = False

        if valid:
            logger.info('Configuration validation passed')
        return valid

    def get_section(self, name: str) -> Dict[str, Any]:
        """Get one configuration section (empty if absent)"""
        return self.config.get(name) or {}

    def get_data_path(self, key: str) -> Optional[str]:
        """Data path from the data section; relative paths resolve against the config file"""
        value = self.get_section('data').get(key)
        if value is None:
            return None
        path = Path(value)
        if not path.is_absolute():
            path = self.config_path.parent / path
        return str(path)

    def get_hierarchy_params(self) -> HierarchyParams:
        """Get hierarchy parameters"""
        return _from_section(HierarchyParams, self.get_section('hierarchy'))

    def get_learner_params(self) -> LearnerParams:
        """Get learner hyperparameters"""
        return _from_section(LearnerParams, self.get_section('learner'))

    def get_bucket_bounds(self) -> List[int]:
        return list(self.get_section('evaluation').get('bucket_bounds', DEFAULT_BUCKET_BOUNDS))

    def build_run_config(self, overrides: Optional[Dict[str, Any]] = None) -> RunConfig:
        """
        Merge command-line values over the loaded file

        Args:
            overrides: Flag values keyed by RunConfig, HierarchyParams or
                LearnerParams field name; None means "not given"

        Returns:
            Validated RunConfig
        """
        given = {k: v for k, v in (overrides or {}).items() if v is not None}
        inference = self.get_section('inference')

        run = RunConfig(
            train_path=self.get_data_path('train'),
            test_path=self.get_data_path('test'),
            labels_path=self.get_data_path('labels'),
            predictions_path=self.get_data_path('predictions'),
            hierarchy=self.get_hierarchy_params(),
            learner=self.get_learner_params(),
            mode=inference.get('mode', DEFAULT_MODE),
            top=inference.get('top', DEFAULT_TOP_R),
            prune=inference.get('prune', DEFAULT_PRUNE),
            omit_zeros=inference.get('omit_zeros', False),
            bucket_bounds=self.get_bucket_bounds(),
        )
        _apply(run, given)
        _apply(run.hierarchy, given)
        _apply(run.learner, given)
        run.validate()
        return run

    def build_bench_config(self, overrides: Optional[Dict[str, Any]] = None) -> BenchConfig:
        """Benchmark configuration from the bench section plus data/learner/evaluation"""
        given = {k: v for k, v in (overrides or {}).items() if v is not None}
        bench = self.get_section('bench')
        hierarchy = self.get_hierarchy_params()

        config = BenchConfig(
            train_path=self.get_data_path('train'),
            test_path=self.get_data_path('test'),
            label_names_path=self.get_data_path('labels'),
            k_values=list(bench.get('k_values', [hierarchy.k])),
            nmax_values=list(bench.get('nmax_values', [hierarchy.nmax])),
            clusterer=hierarchy.clusterer,
            iterations=hierarchy.iterations,
            learner=self.get_learner_params(),
            bucket_bounds=self.get_bucket_bounds(),
            include_br=bool(bench.get('include_br', True)),
            output_dir=bench.get('output_dir'),
            threads=int(bench.get('threads', 1)),
        )
        if 'seeds' in bench:
            config.seeds = list(bench['seeds'])
        _apply(config, given)
        config.validate()
        return config


def _from_section(cls, section: Dict[str, Any]):
    known = {f.name for f in fields(cls)}
    for key in section:
        if key not in known:
            logger.warning(f'Ignoring unknown {cls.__name__} key: {key}')
    try:
        return cls(**{k: v for k, v in section.items() if k in known})
    except TypeError as e:
        raise ConfigError(str(e)) from e


def _apply(target, values: Dict[str, Any]) -> None:
    names = {f.name for f in fields(target)}
    for key, value in values.items():
        if key in names and not isinstance(getattr(target, key), (HierarchyParams, LearnerParams)):
            setattr(target, key, value)
