"""Order-preserving fan-out over independent work items.

Kernels release the GIL, so threads give real parallelism. Results are
always returned in input order and every reduction happens afterwards in
that fixed order, so output does not depend on the worker count.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, Sequence, TypeVar

import numpy as np

T = TypeVar("T")
R = TypeVar("R")

ENV_THREADS = "RADIUS_LAB_THREADS"


def worker_count() -> int:
    raw = os.environ.get(ENV_THREADS, "").strip()
    if not raw:
        return 1
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def pmap(fn: Callable[[T], R], items: Iterable[T], workers: int | None = None) -> list[R]:
    items = list(items)
    workers = worker_count() if workers is None else workers
    if workers <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, items))


def chunks(n: int, size: int) -> list[tuple[int, int]]:
    return [(i, min(i + size, n)) for i in range(0, n, size)]


def sample_rng(seed: int, index: int) -> np.random.Generator:
    """Independent stream for sample (or chunk) ``index`` of a run seeded with ``seed``."""
    return np.random.default_rng([int(seed) & 0xFFFFFFFFFFFFFFFF, int(index)])


def uniform_points(seed: int, n: int, chunk: int = 4096) -> np.ndarray:
    """n uniform torus points; chunk c is drawn from stream (seed, c)."""
    parts = [sample_rng(seed, c).random((hi - lo, 2)) for c, (lo, hi) in enumerate(chunks(n, chunk))]
    return np.concatenate(parts) if parts else np.empty((0, 2))


def map_points(fn: Callable[[np.ndarray], np.ndarray], pts: np.ndarray,
               chunk: int = 2048) -> np.ndarray:
    """Apply a vectorised per-point function over row chunks, possibly in parallel."""
    spans = chunks(len(pts), chunk)
    parts: Sequence[np.ndarray] = pmap(lambda s: fn(pts[s[0]:s[1]]), spans)
    return np.concatenate(parts) if parts else fn(pts[:0])
