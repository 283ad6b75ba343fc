"""Deterministic task fan-out: RNG substreams and an ordered thread map.

Every stochastic routine derives one independent generator per task from
``(seed, task_index)``; results are assembled in task order. Outputs are
therefore bit-identical for a given seed no matter how many worker threads
run the tasks.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence, TypeVar

import numpy as np

_T = TypeVar("_T")

THREADS_ENV_VAR = "REFPRIOR_THREADS"


def rng_substream(seed: int, index: int) -> np.random.Generator:
    """Independent generator for task ``index`` of a run seeded with ``seed``."""
    return np.random.default_rng(np.random.SeedSequence(entropy=int(seed), spawn_key=(int(index),)))


def resolve_threads(requested: int | None = None) -> int:
    """Worker count: explicit argument, else REFPRIOR_THREADS, else cpu count."""
    if requested is not None:
        return max(1, int(requested))
    env = os.environ.get(THREADS_ENV_VAR)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1


def ordered_map(fn: Callable[[int], _T], n_tasks: int, threads: int | None = None) -> list[_T]:
    """Evaluate ``fn(0..n_tasks-1)``, returning results in task order."""
    workers = min(resolve_threads(threads), max(1, n_tasks))
    if workers <= 1 or n_tasks <= 1:
        return [fn(i) for i in range(n_tasks)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, range(n_tasks)))


def sequence_map(fn: Callable[[_T], object], items: Sequence[_T], threads: int | None = None) -> list:
    """``ordered_map`` over an explicit item sequence."""
    return ordered_map(lambda i: fn(items[i]), len(items), threads)
