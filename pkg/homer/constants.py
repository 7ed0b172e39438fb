"""
Application Constants and Defaults

This module contains all toolkit-wide constants and default values
to eliminate magic numbers throughout the codebase.
"""

# Hierarchy construction
DEFAULT_K = 3
DEFAULT_NMAX = 20
DEFAULT_ITERATIONS = 3  # balanced k-means passes, no convergence test
DEFAULT_SEED = 0
DEFAULT_CLUSTERER = 'balanced-kmeans'
CLUSTERER_CHOICES = ('balanced-kmeans', 'kmeans')

# Base learner
DEFAULT_L2 = 1e-4
DEFAULT_EPOCHS = 100
DEFAULT_LOSS = 'logistic'
LOSS_CHOICES = ('logistic', 'hinge')
DECISION_THRESHOLD = 0.5  # score >= threshold <=> margin >= 0

# Inference
DEFAULT_MODE = 'bipartition'
MODE_CHOICES = ('bipartition', 'ranking')
DEFAULT_TOP_R = 20
DEFAULT_PRUNE = True

# Evaluation
DEFAULT_BUCKET_BOUNDS = (70, 700)  # rare <= 70 < mid < 700 <= frequent
DEFAULT_BUCKET_NAMES = ('rare', 'mid', 'frequent')
DEFAULT_BENCH_SEEDS = (0, 1, 2)

# Persistence
MODEL_FORMAT = 'homer-model'
MODEL_FORMAT_VERSION = 1
REPORT_SCHEMA_VERSION = 1

# Exit codes
EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_USAGE = 2
EXIT_MISMATCH = 3

# Logging
DEFAULT_LOG_LEVEL = 'INFO'
LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
LOG_MAX_BYTES = 10 * 1024 * 1024  # 10 MB
LOG_BACKUP_COUNT = 5
LOG_LEVEL_ENV_VAR = 'HOMER_LOG_LEVEL'
THREADS_ENV_VAR = 'HOMER_THREADS'
