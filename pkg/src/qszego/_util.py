"""Shared plumbing: deterministic substreams, thread pool, stable hashing."""

import hashlib
import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np


def substream(seed, *key):
    """Derive an independent numpy Generator from (seed, key...).

    Keyed (not sequential) derivation: the stream for a task depends only on
    its key, never on how many streams were created before it, so parallel
    and serial execution produce identical results.
    """
    parts = [int(seed) & 0xFFFFFFFFFFFFFFFF]
    for k in key:
        parts.append(int(k) & 0xFFFFFFFFFFFFFFFF)
    return np.random.default_rng(np.random.SeedSequence(parts))


def stable_key(*arrays):
    """64-bit content hash of float arrays, stable across runs and platforms."""
    h = hashlib.blake2b(digest_size=8)
    for a in arrays:
        h.update(np.ascontiguousarray(a, dtype=np.float64).tobytes())
    return int.from_bytes(h.digest(), "little")


def max_threads():
    """Thread cap from QSK_THREADS (default: cpu count, at most 8)."""
    env = os.environ.get("QSK_THREADS")
    if env is not None:
        return max(1, int(env))
    return max(1, min(8, os.cpu_count() or 1))


def parallel_map(fn, items):
    """Order-preserving map over items, threaded when QSK_THREADS allows.

    Each item must be independent (own substream); results are collected in
    input order so reductions downstream stay deterministic.
    """
    items = list(items)
    workers = min(max_threads(), len(items)) if items else 1
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
