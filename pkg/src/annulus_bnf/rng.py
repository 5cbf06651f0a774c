"""Counter-based random streams and worker-count resolution.

All randomness is derived from one integer seed. A stream is addressed by a
tuple of task identifiers, so the numbers a task sees never depend on how
tasks are scheduled across workers.
"""

import os

import numpy as np

THREADS_ENV = "ANNULUS_BNF_THREADS"


def task_rng(seed, *task_ids):
    """Return a Philox generator keyed by ``(seed, *task_ids)``.

    Parameters
    ----------
    seed : int
        Global seed.
    *task_ids : int
        Task coordinates (e.g. block index, experiment index).

    Returns
    -------
    numpy.random.Generator
    """
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF] + [int(t) for t in task_ids])
    return np.random.Generator(np.random.Philox(ss))


def resolve_threads(threads=None):
    """Worker count: explicit value, else the environment variable, else 1."""
    if threads is not None:
        n = int(threads)
    else:
        env = os.environ.get(THREADS_ENV, "").strip()
        n = int(env) if env else 1
    if n < 1:
        raise ValueError("thread count must be >= 1")
    return n


def run_tasks(func, items, threads=1):
    """Map ``func`` over ``items`` with an optional thread pool.

    Results come back in input order, so any reduction over them is
    independent of the worker count.
    """
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [func(it) for it in items]
    from concurrent.futures import ThreadPoolExecutor

    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(func, items))
