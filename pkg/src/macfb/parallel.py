"""Worker-count control, per-block seeding and binomial intervals shared by the
Monte-Carlo routines. Results never depend on the number of workers: work is cut
into fixed blocks, each block gets its own spawned seed, and block results are
merged in block order."""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

ENV_THREADS = "MACFB_THREADS"


def worker_count(requested: int | None = None) -> int:
    cap = os.environ.get(ENV_THREADS)
    n = requested or (os.cpu_count() or 1)
    if cap:
        try:
            n = min(n, max(1, int(cap)))
        except ValueError:
            pass
    return max(1, n)


def block_sizes(total: int, block: int) -> list[int]:
    sizes = [block] * (total // block)
    if total % block:
        sizes.append(total % block)
    return sizes


def run_blocks(fn, total: int, seed: int, block: int = 4096, workers: int | None = None) -> list:
    """Call ``fn(rng, size, index)`` for each block and return results in block order."""
    sizes = block_sizes(total, block)
    seeds = np.random.SeedSequence(seed).spawn(len(sizes))
    jobs = [(np.random.default_rng(s), n, i) for i, (s, n) in enumerate(zip(seeds, sizes))]
    w = worker_count(workers)
    if w == 1 or len(jobs) <= 1:
        return [fn(*job) for job in jobs]
    with ThreadPoolExecutor(max_workers=w) as pool:
        return list(pool.map(lambda job: fn(*job), jobs))


def wilson(k: int, n: int, z: float = 1.959963984540054) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if n <= 0:
        return 0.0, 1.0
    p = k / n
    denom = 1 + z * z / n
    centre = (p + z * z / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    return max(0.0, centre - half), min(1.0, centre + half)
