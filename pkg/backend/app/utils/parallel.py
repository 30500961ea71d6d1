"""Deterministic chunked execution over replicate rows."""

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List, Optional, Sequence, Tuple, TypeVar

import numpy as np

from app.config import Config

T = TypeVar("T")


def row_chunks(n_rows: int, chunk_rows: Optional[int] = None) -> List[Tuple[int, int]]:
    """Split range(n_rows) into fixed-size [start, stop) chunks.

    The chunk size never depends on the worker count, so every chunk performs
    the same floating point operations whatever the parallelism.
    """
    size = chunk_rows or Config.CHUNK_ROWS
    return [(start, min(start + size, n_rows)) for start in range(0, n_rows, size)]


def map_ordered(fn: Callable[..., T], items: Sequence, threads: Optional[int] = None) -> List[T]:
    """Apply fn to every item, returning results in input order."""
    workers = threads if threads is not None else Config.THREADS
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def map_row_chunks(
    fn: Callable[[int, int], np.ndarray],
    n_rows: int,
    threads: Optional[int] = None,
    chunk_rows: Optional[int] = None,
) -> np.ndarray:
    """Evaluate fn(start, stop) on every chunk and stack the results along axis 0."""
    chunks = row_chunks(n_rows, chunk_rows)
    parts = map_ordered(lambda bounds: fn(*bounds), chunks, threads)
    return np.concatenate(parts, axis=0)
