"""Replicate scheduling.

Replicates are independent given their stream keys, so the worker count only
affects wall-clock time.  Results always come back in replicate order.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, TypeVar

T = TypeVar("T")


def map_replicates(fn: Callable[[int], T], reps: int, workers: int = 1) -> list[T]:
    if reps < 1:
        raise ValueError("need at least one replicate")
    if workers <= 1:
        return [fn(i) for i in range(reps)]
    # the compiled kernels release the GIL
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, range(reps)))
