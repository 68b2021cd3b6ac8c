"""Shared plumbing: deterministic parallel mapping and config hashing."""
from __future__ import annotations

import hashlib
import json
import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, Sequence


def thread_cap() -> int:
    """Parallelism cap from CONTLAB_THREADS (default 1: fully sequential)."""
    raw = os.environ.get("CONTLAB_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def pmap(fn: Callable, items: Sequence) -> list:
    """Map preserving input order; parallel when the thread cap allows.

    Results are collected in submission order, so output never depends on the
    execution schedule.
    """
    cap = thread_cap()
    items = list(items)
    if cap <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=min(cap, len(items))) as pool:
        return list(pool.map(fn, items))


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def config_hash(obj) -> str:
    """Short stable hash over canonicalized config bytes."""
    return hashlib.sha256(canonical_json(obj).encode()).hexdigest()[:8]
