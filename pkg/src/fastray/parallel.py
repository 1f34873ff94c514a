"""Deterministic chunked execution for the per-voxel parallel operators.

Work is split into contiguous index ranges; each worker owns its range and
writes to disjoint output slices (or returns a partial reduced in range
order), so results never depend on the schedule. FASTRAY_THREADS sets the
default worker count; the fallback is 1.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

__all__ = ["resolve_threads", "chunk_ranges", "run_chunked"]

THREADS_ENV = "FASTRAY_THREADS"


def resolve_threads(threads: int | None) -> int:
    """Explicit argument wins, then FASTRAY_THREADS, then 1."""
    if threads is None:
        raw = os.environ.get(THREADS_ENV, "")
        threads = int(raw) if raw.strip() else 1
    if threads < 1:
        raise ValueError(f"thread count must be >= 1, got {threads}")
    return threads


def chunk_ranges(n_items: int, n_chunks: int) -> list[tuple[int, int]]:
    """Split [0, n_items) into at most n_chunks contiguous ranges."""
    n_chunks = max(1, min(n_chunks, n_items))
    step = -(-n_items // n_chunks)
    return [(lo, min(lo + step, n_items)) for lo in range(0, n_items, step)]


def run_chunked(fn, n_items: int, threads: int | None) -> list:
    """Run fn(lo, hi) over contiguous chunks; returns results in range order.

    With one thread (or a trivially small workload) this is a plain call,
    so the sequential path and the pooled path execute identical chunks.
    """
    threads = resolve_threads(threads)
    if threads == 1 or n_items <= 1:
        return [fn(0, n_items)]
    ranges = chunk_ranges(n_items, threads)
    with ThreadPoolExecutor(max_workers=len(ranges)) as pool:
        futures = [pool.submit(fn, lo, hi) for lo, hi in ranges]
        return [f.result() for f in futures]
