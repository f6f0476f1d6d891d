"""Seed splitting and order-preserving parallel map for sweeps."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, TypeVar

import numpy as np

T = TypeVar("T")
R = TypeVar("R")

THREADS_ENV = "QETLAB_THREADS"


def derive_seed(master: int, index: int) -> int:
    """Per-sample seed: first 32-bit word of SeedSequence(master, spawn_key=(index,)).

    Depends only on (master, index), never on execution order.
    """
    ss = np.random.SeedSequence(int(master), spawn_key=(int(index),))
    return int(ss.generate_state(1, dtype=np.uint32)[0])


def worker_count(requested: int | None = None) -> int:
    if requested is not None:
        return max(1, int(requested))
    raw = os.environ.get(THREADS_ENV)
    if not raw:
        return 1
    try:
        return max(1, int(raw))
    except ValueError:
        raise ValueError(f"{THREADS_ENV} must be a positive integer, got {raw!r}") from None


def ordered_map(fn: Callable[[T], R], items: Iterable[T], workers: int | None = None) -> list[R]:
    """``list(map(fn, items))``, optionally threaded; output order is input order."""
    items = list(items)
    n = worker_count(workers)
    if n == 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))
