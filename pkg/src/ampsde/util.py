"""Replica scheduling shared by the Monte Carlo experiments.

Replica r of an experiment is a pure function of (seed, r), so the work can
be split into fixed-size chunks and farmed out to worker processes without
changing any result: chunks are reassembled in index order and reductions
run over replica-ordered arrays.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor

import numpy as np

__all__ = ["run_replica_chunks"]


def _call(args):
    fn, lo, hi, kwargs = args
    return fn(lo, hi, **kwargs)


def run_replica_chunks(fn, total: int, chunk_size: int, workers: int, **kwargs):
    """Run ``fn(lo, hi, **kwargs)`` over [0, total) in chunks; concat the dict-of-arrays.

    ``fn`` must be a module-level function returning a dict of per-replica
    arrays of length hi - lo.  Output is identical for any worker count.
    """
    if total <= 0:
        raise ValueError("need at least one replica")
    chunk_size = max(1, int(chunk_size))
    bounds = [(lo, min(lo + chunk_size, total)) for lo in range(0, total, chunk_size)]
    tasks = [(fn, lo, hi, kwargs) for lo, hi in bounds]
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(tasks))) as pool:
            parts = list(pool.map(_call, tasks))
    else:
        parts = [_call(task) for task in tasks]
    keys = parts[0].keys()
    return {key: np.concatenate([part[key] for part in parts]) for key in keys}
