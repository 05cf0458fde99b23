"""Random-stream splitting and chunked, thread-count-independent Monte Carlo.

Replications are cut into fixed-size chunks.  Chunk ``j`` draws process
``s`` from ``SeedSequence(seed, spawn_key=(j, s))``, so every number a
replication sees depends only on the master seed, the chunk size and its
index, never on how many worker threads ran the chunks.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence, TypeVar

import numpy as np

T = TypeVar("T")

DEFAULT_CHUNK = 2500

# stream identifiers
FACTOR, ASSET, ARRIVALS, MARKS = 0, 1, 2, 3


def rng(seed: int, chunk: int, stream: int) -> np.random.Generator:
    """Generator for one process in one chunk."""
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(int(chunk), int(stream))))


def child_seed(seed: int, index: int) -> int:
    """Deterministic 64-bit seed for sub-experiment ``index`` (e.g. a sweep point)."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(index),))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


@dataclass(frozen=True)
class Chunk:
    index: int
    start: int
    size: int


def chunks(n_reps: int, chunk_size: int = DEFAULT_CHUNK) -> list[Chunk]:
    if n_reps < 0 or chunk_size <= 0:
        raise ValueError("n_reps must be >= 0 and chunk_size > 0")
    return [Chunk(j, s, min(chunk_size, n_reps - s)) for j, s in enumerate(range(0, n_reps, chunk_size))]


def run_chunked(
    fn: Callable[[Chunk], T], n_reps: int, chunk_size: int = DEFAULT_CHUNK, threads: int = 1
) -> list[T]:
    """Apply ``fn`` to every chunk; results come back in chunk order."""
    parts = chunks(n_reps, chunk_size)
    if threads <= 1 or len(parts) <= 1:
        return [fn(c) for c in parts]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, parts))


def concat(parts: Sequence[np.ndarray]) -> np.ndarray:
    return np.concatenate(parts, axis=0) if len(parts) else np.empty(0)


def mean_se(x: np.ndarray) -> tuple[float, float]:
    """Sample mean and its standard error."""
    x = np.asarray(x, dtype=float)
    n = x.size
    if n == 0:
        return float("nan"), float("nan")
    m = float(x.mean())
    se = float(x.std(ddof=1) / np.sqrt(n)) if n > 1 else float("inf")
    return m, se


def trapezoid(values: np.ndarray, dt: float) -> np.ndarray:
    """Trapezoid rule along the last axis on a uniform grid."""
    v = np.asarray(values, dtype=float)
    if v.shape[-1] < 2:
        return np.zeros(v.shape[:-1])
    return dt * (0.5 * (v[..., 0] + v[..., -1]) + v[..., 1:-1].sum(axis=-1))
