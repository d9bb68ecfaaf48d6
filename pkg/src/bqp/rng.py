"""Seeded random streams.

All randomness flows from one integer seed.  Work is cut into fixed-size
chunks and chunk ``k`` draws from ``SeedSequence(seed, spawn_key=(k,))``,
which is exactly the stream numpy hands out as ``SeedSequence(seed).spawn(n)[k]``.
Since the chunking does not depend on how many workers run the chunks,
aggregated statistics are identical for any worker count.
"""

from concurrent.futures import ProcessPoolExecutor

import numpy as np

DEFAULT_CHUNK = 10_000


def make_rng(seed):
    """Return a generator for ``seed``; pass generators through unchanged."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def stream(seed, index):
    """Generator for replica/chunk ``index`` under the splitting rule."""
    ss = np.random.SeedSequence(seed, spawn_key=(int(index),))
    return np.random.default_rng(ss)


def chunk_sizes(n, chunk=DEFAULT_CHUNK):
    """Split ``n`` replicas into fixed chunks; the last one may be short."""
    sizes = [chunk] * (n // chunk)
    if n % chunk:
        sizes.append(n % chunk)
    return sizes


def run_chunks(fn, n, seed, *args, chunk=DEFAULT_CHUNK, workers=1):
    """Call ``fn(rng, size, *args)`` once per chunk and return the results in
    chunk order.  ``fn`` must be picklable when ``workers > 1``."""
    sizes = chunk_sizes(n, chunk)
    if workers <= 1 or len(sizes) <= 1:
        return [fn(stream(seed, k), size, *args) for k, size in enumerate(sizes)]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(_call, fn, seed, k, size, args)
                   for k, size in enumerate(sizes)]
        return [f.result() for f in futures]


def _call(fn, seed, k, size, args):
    return fn(stream(seed, k), size, *args)
