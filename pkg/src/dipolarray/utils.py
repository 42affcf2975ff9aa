"""Shared small helpers: errors, threading, CSV/JSON writers."""

from __future__ import annotations

import csv
import json
import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np


class ConvergenceError(RuntimeError):
    """A truncated sum or iterative fit failed to converge."""


class LightConePoleError(ValueError):
    """An in-plane momentum landed on the free-space light circle |q| = k."""


class FitError(RuntimeError):
    """A least-squares fit was requested on data it cannot describe."""


class IntegrationError(RuntimeError):
    """Time stepping became unstable (norm growth with the drive off)."""


_MAX_THREADS = min(4, os.cpu_count() or 1)


def set_max_threads(n: int) -> None:
    global _MAX_THREADS
    if n < 1:
        raise ValueError("thread count must be >= 1")
    _MAX_THREADS = int(n)


def get_max_threads() -> int:
    return _MAX_THREADS


def parallel_map(fn, items, threads: int | None = None):
    """Order-preserving map over independent work items.

    Results are returned in input order regardless of completion order, so
    sweeps stay deterministic.  LAPACK-heavy callables release the GIL and
    benefit from real concurrency.
    """
    items = list(items)
    n = threads if threads is not None else _MAX_THREADS
    if n <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=min(n, len(items))) as pool:
        return list(pool.map(fn, items))


def write_csv(path, header, rows) -> None:
    """CSV with comma separator, '.' decimals, header row, LF endings."""
    with open(path, "w", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return int(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".12g")
    return v


def write_json(path, obj) -> None:
    with open(path, "w", newline="\n") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")
