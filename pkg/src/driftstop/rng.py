"""Counter-based random streams.

Every batch of paths is cut into fixed-size blocks.  Block ``b`` of stream
``tag`` draws from a Philox generator keyed by ``(seed, tag << 48 | b)``, so the
numbers a path sees depend only on the master seed and the path index, never
on how blocks are scheduled across threads.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np

BLOCK = 2048
MASK64 = (1 << 64) - 1

# stream tags
NORMALS = 1
DRIFT = 2
IE_PATHS = 3


def block_generator(seed: int, tag: int, block: int) -> np.random.Generator:
    if not 0 <= block < (1 << 48):
        raise ValueError("block index out of range")
    key = np.array([int(seed) & MASK64, ((int(tag) << 48) | int(block)) & MASK64], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def blocks(n_paths: int, block: int = BLOCK):
    """``(index, start, stop)`` for each block of a batch of ``n_paths`` paths."""
    for b, start in enumerate(range(0, n_paths, block)):
        yield b, start, min(start + block, n_paths)


def run_blocks(fn, n_paths: int, out: np.ndarray, workers: int | None = None, block: int = BLOCK) -> np.ndarray:
    """Fill ``out[start:stop] = fn(b, stop - start)`` for every block.

    Each block writes to its own slice, so the result is the same for any
    ``workers`` value.
    """
    jobs = list(blocks(n_paths, block))

    def one(job):
        b, start, stop = job
        out[start:stop] = fn(b, stop - start)

    if workers is None or workers <= 1:
        for job in jobs:
            one(job)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(one, jobs))
    return out
