"""Thread-pool helper with a process-wide worker cap.

Results are always returned in input order, whatever the completion order.
"""

import os
from concurrent.futures import ThreadPoolExecutor

_max_threads = None


def set_threads(n):
    global _max_threads
    if n is not None and n < 1:
        raise ValueError("thread count must be >= 1")
    _max_threads = n


def get_threads():
    return _max_threads or os.cpu_count() or 1


def pmap(fn, items, threads=None):
    items = list(items)
    workers = min(threads or get_threads(), len(items))
    if workers <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
