"""Tiny shared utilities."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor


def parallel_map(fn, items, threads=1):
    """Order-preserving map, optionally over a thread pool.

    The hot kernels release the GIL, so threads give real parallelism for
    Monte Carlo replicas while keeping results in deterministic order.
    """
    items = list(items)
    if threads is None or threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))
