"""Trial-parallel execution with reproducible per-trial seeds.

Trials are pure functions of (config, trial seed); results are collected in
trial order regardless of completion order, so reductions see a fixed
sequence and repeated runs are bit-identical.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Sequence

from .ensemble import derive_seed

__all__ = ["default_workers", "run_trials", "derive_seed"]

_WORKER_ENV = "BBP_LAB_THREADS"


def default_workers(override: int | None = None) -> int:
    """Worker count: explicit override, else BBP_LAB_THREADS, else cpu count."""
    if override is not None and override > 0:
        return override
    env = os.environ.get(_WORKER_ENV)
    if env:
        try:
            val = int(env)
            if val > 0:
                return val
        except ValueError:
            pass
    return os.cpu_count() or 1


def _limit_blas_threads() -> None:
    # One BLAS thread per worker process; the parallelism lives across trials.
    try:
        from threadpoolctl import threadpool_limits

        threadpool_limits(limits=1)
    except Exception:  # pragma: no cover - best effort
        pass


_WORK_FN: Callable | None = None
_WORK_ARGS: tuple = ()


def _init_worker(fn, args):
    global _WORK_FN, _WORK_ARGS
    _limit_blas_threads()
    _WORK_FN = fn
    _WORK_ARGS = args


def _run_one(payload):
    index, seed = payload
    return _WORK_FN(*_WORK_ARGS, seed)


def run_trials(
    fn: Callable,
    args: tuple,
    trials: int,
    master_seed: int,
    workers: int | None = None,
) -> list:
    """Evaluate fn(*args, seed_t) for t = 0..trials-1, in trial order.

    seed_t = derive_seed(master_seed, t).  With workers == 1 everything runs
    in-process (cheap for small matrices and simplest to debug).
    """
    seeds = [derive_seed(master_seed, t) for t in range(trials)]
    nworkers = default_workers(workers)
    if nworkers <= 1 or trials <= 1:
        return [fn(*args, s) for s in seeds]
    chunk = max(1, trials // (nworkers * 8))
    with ProcessPoolExecutor(
        max_workers=nworkers, initializer=_init_worker, initargs=(fn, args)
    ) as pool:
        results = list(pool.map(_run_one, list(enumerate(seeds)), chunksize=chunk))
    return results
