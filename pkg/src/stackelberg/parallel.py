"""Ordered parallel map honouring the ``SOLVER_THREADS`` cap."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor


def worker_count() -> int:
    try:
        return max(1, int(os.environ.get("SOLVER_THREADS", "1")))
    except ValueError:
        return 1


def ordered_map(fn, items):
    """``[fn(x) for x in items]``, possibly threaded; result order is the input order."""
    items = list(items)
    n = min(worker_count(), len(items))
    if n <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))
