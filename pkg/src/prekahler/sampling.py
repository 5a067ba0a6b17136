"""Worker-pool plumbing for per-sample evaluation.

Seeded point generation lives on ``Domain.sample``; this module only decides
how wide the evaluation fan-out may be.  The cap comes from the
``PREKAHLER_THREADS`` environment variable and defaults to a small number so
a shared box is not saturated by accident.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, List, TypeVar

S = TypeVar("S")
T = TypeVar("T")

_DEFAULT_CAP = 4
_MIN_PARALLEL_BATCH = 8


def thread_cap() -> int:
    """Maximum worker count, from PREKAHLER_THREADS when set."""
    raw = os.environ.get("PREKAHLER_THREADS")
    if raw is None:
        return max(1, min(_DEFAULT_CAP, os.cpu_count() or 1))
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(
            "PREKAHLER_THREADS must be an integer, got %r" % raw) from None
    return max(1, n)


def map_samples(fn: Callable[[S], T], items: Iterable[S],
                cap: int | None = None) -> List[T]:
    """Apply ``fn`` across ``items``, preserving order.

    Small batches run serially; larger ones share a thread pool bounded by
    :func:`thread_cap`.  Results come back in input order either way, so
    callers can zip them against the sample list.
    """
    work = list(items)
    limit = thread_cap() if cap is None else max(1, cap)
    if limit <= 1 or len(work) < _MIN_PARALLEL_BATCH:
        return [fn(x) for x in work]
    with ThreadPoolExecutor(max_workers=min(limit, len(work))) as pool:
        return list(pool.map(fn, work))
