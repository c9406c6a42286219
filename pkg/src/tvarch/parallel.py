"""Order-preserving map over independent work items."""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor

ENV_THREADS = "TVARCH_THREADS"


def worker_count(default: int = 1) -> int:
    """Worker count from the ``TVARCH_THREADS`` environment variable."""
    raw = os.environ.get(ENV_THREADS)
    if raw is None or raw.strip() == "":
        return default
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"{ENV_THREADS} must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise ValueError(f"{ENV_THREADS} must be a positive integer, got {raw!r}")
    return n


def pmap(fn, items, workers: int = 1) -> list:
    """``[fn(x) for x in items]``, spread over ``workers`` processes when ``workers > 1``.

    Results come back in input order, so output does not depend on the
    worker count.
    """
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=min(workers, len(items))) as ex:
        return list(ex.map(fn, items))
