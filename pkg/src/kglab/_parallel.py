"""Replica-parallel map with output ordered by replica id."""
import os
from concurrent.futures import ProcessPoolExecutor

import numpy as np


def default_workers():
    try:
        return max(len(os.sched_getaffinity(0)), 1)
    except AttributeError:  # pragma: no cover - non-Linux
        return max(os.cpu_count() or 1, 1)


def map_replicas(func, replica_ids, workers=1):
    """Apply ``func`` to chunks of replica ids and stack the rows in id order.

    ``func(ids)`` must return an array whose first axis matches ``ids``.  Each
    replica draws from its own stream, so the result does not depend on
    ``workers``.
    """
    ids = np.asarray(sorted(int(r) for r in replica_ids), dtype=np.int64)
    if workers is None:
        workers = default_workers()
    if workers <= 1 or len(ids) < 2:
        return np.asarray(func(ids))
    chunks = [c for c in np.array_split(ids, min(workers * 4, len(ids))) if len(c)]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(func, chunks))
    return np.concatenate([np.asarray(p) for p in parts], axis=0)
