"""Point-sweep helper: serial by default, fork pool when GEOFORMS_WORKERS > 1."""

from __future__ import annotations

import multiprocessing as mp
import os
from typing import Callable, Sequence

_TASK: Callable | None = None
_ITEMS: Sequence | None = None


def worker_count(explicit: int | None = None) -> int:
    if explicit is not None:
        return max(1, int(explicit))
    raw = os.environ.get("GEOFORMS_WORKERS", "").strip()
    if not raw:
        return 1
    try:
        return max(1, int(raw))
    except ValueError:
        raise ValueError(f"GEOFORMS_WORKERS must be an integer, got {raw!r}") from None


def _call(i):
    return _TASK(_ITEMS[i])


def pmap(fn: Callable, items: Sequence, workers: int | None = None) -> list:
    """Ordered map. Workers are forked so `fn` may be any closure."""
    items = list(items)
    n = min(worker_count(workers), len(items))
    if n <= 1 or "fork" not in mp.get_all_start_methods():
        return [fn(x) for x in items]
    global _TASK, _ITEMS
    _TASK, _ITEMS = fn, items
    try:
        with mp.get_context("fork").Pool(n) as pool:
            return pool.map(_call, range(len(items)))
    finally:
        _TASK, _ITEMS = None, None
