from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Iterable


def parallel_map(fn: Callable, items: Iterable, jobs: int, initializer=None, initargs=()) -> list:
    """Order-preserving map over worker processes; serial when jobs <= 1."""
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        if initializer is not None:
            initializer(*initargs)
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=jobs, initializer=initializer, initargs=initargs) as pool:
        return list(pool.map(fn, items))
