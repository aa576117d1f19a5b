"""Deterministic block-parallel map and seeded random streams.

Work is cut into blocks whose boundaries depend only on the problem size,
never on the worker count, and results are reassembled in block order.  Each
block that needs randomness draws from its own Philox stream keyed by
(seed, block index), so output is bit-identical for any number of threads.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

DEFAULT_BLOCK = 4096
_threads = max(1, int(os.environ.get("COCYCLE_LAB_THREADS", "1")))


def set_threads(n: int) -> None:
    global _threads
    _threads = max(1, int(n))


def get_threads() -> int:
    return _threads


def blocks(n_items: int, block: int = DEFAULT_BLOCK) -> list:
    return [(s, min(s + block, n_items)) for s in range(0, n_items, block)]


def block_map(func, n_items: int, block: int = DEFAULT_BLOCK, threads: int | None = None) -> list:
    """[func(start, stop, index) for each block], evaluated on a thread pool."""
    parts = blocks(n_items, block)
    threads = _threads if threads is None else max(1, int(threads))
    if threads == 1 or len(parts) <= 1:
        return [func(s, e, i) for i, (s, e) in enumerate(parts)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        futs = [pool.submit(func, s, e, i) for i, (s, e) in enumerate(parts)]
        return [f.result() for f in futs]


def block_rng(seed: int, block_index: int) -> np.random.Generator:
    """Counter-based stream for one block; independent of scheduling."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(block_index),))
    return np.random.Generator(np.random.Philox(ss))


def concat(parts) -> np.ndarray:
    return np.concatenate([np.atleast_1d(p) for p in parts]) if parts else np.zeros(0)
