"""Chunked execution of sampling work, optionally across worker threads.

Chunk boundaries depend only on the total sample count, and every sample's
random stream is derived from its global index, so results are identical
for any worker count.  Partial results are merged in chunk order.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, TypeVar

T = TypeVar("T")

DEFAULT_CHUNK = 65536

_WORKERS_ENV = "ICSHAPLEY_WORKERS"


def default_workers() -> int:
    raw = os.environ.get(_WORKERS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def chunk_ranges(total: int, chunk: int = DEFAULT_CHUNK) -> list[tuple[int, int]]:
    return [(lo, min(lo + chunk, total)) for lo in range(0, total, chunk)]


def run_chunks(
    task: Callable[[int, int], T],
    total: int,
    workers: int = 1,
    chunk: int = DEFAULT_CHUNK,
) -> list[T]:
    """Run task(start, stop) over fixed chunks; results returned in chunk order."""
    ranges = chunk_ranges(total, chunk)
    if workers <= 1 or len(ranges) <= 1:
        return [task(lo, hi) for lo, hi in ranges]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda r: task(*r), ranges))
