"""
Worker pool helper behind the --threads flag

Results always come back in input order, so the thread count changes
scheduling only, never the numbers.
"""

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, List, Optional, TypeVar

from .constants import THREADS_ENV_VAR

logger = logging.getLogger(__name__)

T = TypeVar('T')
R = TypeVar('R')


def resolve_threads(threads: Optional[int] = None) -> int:
    """Explicit value, else HOMER_THREADS, else 1"""
    if threads is None:
        threads = int(os.getenv(THREADS_ENV_VAR, '1'))
    return max(1, int(threads))


def parallel_map(fn: Callable[[T], R], items: Iterable[T],
                 threads: Optional[int] = 1) -> List[R]:
    """
    Apply fn to every item, optionally on a thread pool

    Args:
        fn: Function to apply
        items: Inputs
        threads: Worker count; 1 runs inline

    Returns:
        Results in input order
    """
    items = list(items)
    workers = min(resolve_threads(threads), max(len(items), 1))
    if workers <= 1:
        return [fn(item) for item in items]

    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
