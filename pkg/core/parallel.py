"""Seeded substreams, fixed work partitioning and deterministic reductions.

Results never depend on the worker count: work is cut into chunks whose
boundaries depend only on the problem size, every chunk draws from its own
SeedSequence child, and partial moments are merged in a fixed tree order.
"""
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, List, Sequence, Tuple, TypeVar

import numpy as np

import config
from models.sampling import Seed

logger = logging.getLogger("Parallel")

T = TypeVar("T")
R = TypeVar("R")

Moments = Tuple[int, float, float]  # (count, mean, M2)


def substream(seed: Seed, *keys: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=seed.value, spawn_key=(seed.stream_id, *keys))
    return np.random.Generator(np.random.PCG64(ss))


def worker_count() -> int:
    # re-read so tests can monkeypatch the environment
    raw = os.getenv("HDG_THREADS")
    n = int(raw) if raw else config.THREADS
    return max(1, n)


def chunk_plan(total: int, width: int = 1, budget: int = None) -> List[Tuple[int, int]]:
    """Split `total` rows of `width` floats into [start, stop) chunks."""
    budget = budget or config.CHUNK_BUDGET
    rows = max(1, budget // max(1, width))
    return [(s, min(total, s + rows)) for s in range(0, total, rows)]


def ordered_map(fn: Callable[[T], R], items: Sequence[T]) -> List[R]:
    items = list(items)
    workers = min(worker_count(), len(items))
    if workers <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def moments(values: np.ndarray) -> Moments:
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        return (0, 0.0, 0.0)
    mean = float(values.mean())
    return (int(values.size), mean, float(np.sum((values - mean) ** 2)))


def merge_moments(a: Moments, b: Moments) -> Moments:
    na, ma, sa = a
    nb, mb, sb = b
    if na == 0:
        return b
    if nb == 0:
        return a
    n = na + nb
    delta = mb - ma
    mean = ma + delta * nb / n
    m2 = sa + sb + delta * delta * na * nb / n
    return (n, mean, m2)


def pairwise_merge(parts: Iterable[Moments]) -> Moments:
    level = list(parts)
    if not level:
        return (0, 0.0, 0.0)
    while len(level) > 1:
        nxt = [merge_moments(level[i], level[i + 1]) for i in range(0, len(level) - 1, 2)]
        if len(level) % 2:
            nxt.append(level[-1])
        level = nxt
    return level[0]


def moments_stderr(m: Moments) -> float:
    n, _, m2 = m
    if n < 2:
        return 0.0
    return math.sqrt(max(m2, 0.0) / (n - 1)) / math.sqrt(n)
