"""
Bounded memoisation for precomputed index tables.

Window index maps depend only on (n, window) and are reused by every
forward pass, gradient sweep and batch worker, so they are built once and
kept behind a small thread-safe LRU.
"""
import threading
from collections import OrderedDict
from dataclasses import dataclass
from functools import wraps
from typing import Any, Callable, Hashable, Tuple

import numpy as np


@dataclass
class CacheStats:
    hits: int = 0
    misses: int = 0
    evictions: int = 0


_MISSING = object()


class LRUCache:
    """Least-recently-used mapping with a fixed capacity; safe to share across threads"""

    def __init__(self, max_size: int = 256):
        if max_size < 1:
            raise ValueError(f"cache size must be positive, got {max_size}")
        self.max_size = max_size
        self.stats = CacheStats()
        self._entries: "OrderedDict[Hashable, Any]" = OrderedDict()
        self._lock = threading.Lock()

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, key: Hashable) -> bool:
        return key in self._entries

    def get_or_build(self, key: Hashable, build: Callable[[], Any]) -> Any:
        """Cached value for key, calling build() on a miss"""
        with self._lock:
            value = self._entries.get(key, _MISSING)
            if value is not _MISSING:
                self._entries.move_to_end(key)
                self.stats.hits += 1
                return value
            self.stats.misses += 1
        # Build outside the lock; a concurrent duplicate build is harmless
        value = build()
        with self._lock:
            self._entries[key] = value
            self._entries.move_to_end(key)
            while len(self._entries) > self.max_size:
                self._entries.popitem(last=False)
                self.stats.evictions += 1
        return value

    def clear(self) -> None:
        with self._lock:
            self._entries.clear()
            self.stats = CacheStats()


def _freeze(value: Any) -> Any:
    # Arrays come back read-only so callers cannot corrupt shared tables
    if isinstance(value, np.ndarray):
        value.setflags(write=False)
    return value


def cached(max_size: int = 256):
    """
    Memoise a function of hashable positional arguments. Array results are
    marked read-only.

    Usage:
        @cached(max_size=512)
        def window_index_map(n, qubits):
            ...
    """
    def decorator(func: Callable):
        cache = LRUCache(max_size=max_size)

        @wraps(func)
        def wrapper(*args: Hashable):
            key: Tuple = args
            return cache.get_or_build(key, lambda: _freeze(func(*args)))

        wrapper.cache = cache
        wrapper.clear_cache = cache.clear
        return wrapper

    return decorator
