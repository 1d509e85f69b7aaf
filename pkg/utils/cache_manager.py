import hashlib
from collections import OrderedDict
from typing import Any, Dict, Optional


class CacheManager:
    """In-memory cache for expensive per-polygon computations."""

    def __init__(self, max_entries: int = 256):
        self.max_entries = max_entries
        self.store: "OrderedDict[str, Any]" = OrderedDict()
        self.hits = 0
        self.misses = 0

    def generate_key(self, *parts: bytes) -> str:
        """Generate cache key from raw bytes."""
        digest = hashlib.md5()
        for part in parts:
            digest.update(part)
        return digest.hexdigest()

    def get(self, key: str) -> Optional[Any]:
        """Retrieve from cache, refreshing the entry."""
        if key not in self.store:
            self.misses += 1
            return None
        self.hits += 1
        self.store.move_to_end(key)
        return self.store[key]

    def set(self, key: str, data: Any) -> None:
        """Store data, evicting the oldest entries beyond capacity."""
        self.store[key] = data
        self.store.move_to_end(key)
        while len(self.store) > self.max_entries:
            self.store.popitem(last=False)

    def clear(self) -> None:
        self.store.clear()
        self.hits = 0
        self.misses = 0

    def get_cache_stats(self) -> Dict[str, Any]:
        """Get cache statistics."""
        return {
            'entries': len(self.store),
            'hits': self.hits,
            'misses': self.misses,
        }
