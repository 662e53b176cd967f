"""Ordered parallel map over pure work units.

Results always come back in input order, and every unit derives its own
seed from labels rather than from shared state, so output does not depend
on the worker count.
"""
from concurrent.futures import ProcessPoolExecutor


def pmap(fn, items, workers=1):
    items = list(items)
    if workers is None or workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items, chunksize=max(1, len(items) // (4 * workers))))
