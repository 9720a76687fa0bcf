"""Deterministic Monte Carlo reduction.

Per-sample values are produced in fixed-size chunks addressed by sample
index; chunk statistics are merged with a pairwise tree in chunk order. The
result therefore does not depend on how many worker threads evaluate the
chunks.
"""

from __future__ import annotations

import contextlib
import math
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

CHUNK = 4096

_state = threading.local()
_default_workers = 1


def set_default_workers(workers: int) -> None:
    global _default_workers
    if workers < 1:
        raise ValueError("workers must be >= 1")
    _default_workers = int(workers)


def get_workers() -> int:
    return getattr(_state, "workers", None) or _default_workers


@contextlib.contextmanager
def workers(count: int):
    """Temporarily set the worker count for estimators in this thread."""
    prev = getattr(_state, "workers", None)
    _state.workers = int(count)
    try:
        yield
    finally:
        _state.workers = prev


@dataclass(frozen=True)
class TransformEstimate:
    mean: float
    stderr: float
    samples: int
    seed: int | None = None
    params: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "mean": self.mean,
            "stderr": self.stderr,
            "samples": self.samples,
            "seed": self.seed,
            "params": self.params,
        }

    def scaled(self, c: float) -> "TransformEstimate":
        return TransformEstimate(self.mean * c, self.stderr * abs(c), self.samples, self.seed, self.params)


def exact(value: float, seed: int | None = None, params: dict | None = None, samples: int = 1) -> TransformEstimate:
    return TransformEstimate(float(value), 0.0, samples, seed, dict(params or {}))


def _chunk_stats(values: np.ndarray) -> tuple[int, float, float]:
    v = np.asarray(values, dtype=float).ravel()
    n = v.size
    if n == 0:
        return 0, 0.0, 0.0
    mu = float(np.mean(v))
    return n, mu, float(np.sum((v - mu) ** 2))


def _merge(a, b):
    na, ma, sa = a
    nb, mb, sb = b
    n = na + nb
    if n == 0:
        return 0, 0.0, 0.0
    d = mb - ma
    return n, ma + d * nb / n, sa + sb + d * d * na * nb / n


def tree_reduce(stats: list) -> tuple[int, float, float]:
    if not stats:
        return 0, 0.0, 0.0
    level = list(stats)
    while len(level) > 1:
        nxt = [_merge(level[i], level[i + 1]) for i in range(0, len(level) - 1, 2)]
        if len(level) % 2:
            nxt.append(level[-1])
        level = nxt
    return level[0]


def reduce_chunks(value_fn: Callable[[int, int], np.ndarray], count: int,
                  chunk: int = CHUNK, n_workers: int | None = None) -> tuple[int, float, float]:
    """Evaluate ``value_fn(start, stop)`` over fixed chunks and merge statistics."""
    bounds = [(s, min(s + chunk, count)) for s in range(0, count, chunk)]
    n_workers = n_workers or get_workers()
    if n_workers > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            stats = list(pool.map(lambda b: _chunk_stats(value_fn(*b)), bounds))
    else:
        stats = [_chunk_stats(value_fn(*b)) for b in bounds]
    return tree_reduce(stats)


def estimate(value_fn: Callable[[int, int], np.ndarray], count: int, seed: int | None = None,
             params: dict | None = None, chunk: int = CHUNK) -> TransformEstimate:
    """Mean and standard error of per-sample values ``value_fn(start, stop)``."""
    if count < 1:
        raise ValueError("sample count must be >= 1")
    n, mu, m2 = reduce_chunks(value_fn, count, chunk)
    se = math.sqrt(m2 / (n - 1) / n) if n > 1 else 0.0
    return TransformEstimate(mu, se, n, seed, dict(params or {}))


def combined_stderr(*ests: TransformEstimate) -> float:
    return math.sqrt(sum(e.stderr ** 2 for e in ests))


def nested_counts(total: int, n_outer: int | None = None, n_inner: int | None = None) -> tuple[int, int]:
    """Default factorization ``N_outer = N_inner = isqrt(N_total)``."""
    if n_outer is None and n_inner is None:
        r = max(1, math.isqrt(total))
        return r, r
    if n_outer is None:
        return max(1, total // n_inner), n_inner
    if n_inner is None:
        return n_outer, max(1, total // n_outer)
    return n_outer, n_inner
