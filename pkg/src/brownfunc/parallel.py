"""Deterministic fan-out of replicate ranges over worker processes.

Replicate indices are assigned before distribution, and results are merged
by concatenation in index order, so output never depends on the number of
workers.
"""

import multiprocessing as mp

import numpy as np


def split_range(n, parts):
    """Contiguous ``(lo, hi)`` ranges covering ``[0, n)``."""
    parts = max(1, min(int(parts), max(n, 1)))
    edges = np.linspace(0, n, parts + 1).round().astype(np.int64)
    return [(int(lo), int(hi)) for lo, hi in zip(edges[:-1], edges[1:])]


def _call(args):
    func, lo, hi = args
    return func(lo, hi)


def map_ranges(func, n, workers=1):
    """Evaluate ``func(lo, hi)`` over a split of ``[0, n)`` and merge.

    ``func`` must return a tuple of 1-d arrays (or a single array) with one
    entry per replicate in the range; must be picklable when ``workers > 1``.
    """
    workers = max(1, int(workers))
    if workers == 1 or n <= 1:
        ranges = [(0, n)]
        results = [func(0, n)]
    else:
        ranges = split_range(n, workers)
        ctx = mp.get_context("fork")
        with ctx.Pool(min(workers, len(ranges))) as pool:
            results = pool.map(_call, [(func, lo, hi) for lo, hi in ranges])
    if isinstance(results[0], tuple):
        return tuple(np.concatenate([r[i] for r in results]) for i in range(len(results[0])))
    return np.concatenate(results)
