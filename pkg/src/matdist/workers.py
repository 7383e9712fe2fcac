import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, List, Optional, TypeVar

import psutil

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


def default_jobs() -> int:
    """Physical core count, or 1 when psutil cannot tell."""
    return psutil.cpu_count(logical=False) or 1


def run_parallel(func: Callable[[T], R], items: Iterable[T], jobs: Optional[int] = None) -> List[R]:
    """Map func over items on a thread pool, keeping input order.

    jobs=1 runs inline on the calling thread.
    """
    items = list(items)
    jobs = default_jobs() if jobs is None else int(jobs)
    if jobs < 1:
        raise ValueError("jobs must be at least 1")
    if jobs == 1 or len(items) <= 1:
        return [func(item) for item in items]

    workers = min(jobs, len(items))
    logger.debug("dispatching %d items to %d worker threads", len(items), workers)
    with ThreadPoolExecutor(max_workers=workers, thread_name_prefix="matdist") as pool:
        return list(pool.map(func, items))
