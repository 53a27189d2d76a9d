"""Cache of solved truncations (truncated chain, factors, stationary head)"""

import hashlib
import logging
import threading
from typing import Optional, Tuple

import numpy as np
from cachetools import LRUCache

from app.config import get_settings
from app.services.model import BlockSequence, MG1Spec

logger = logging.getLogger(__name__)


def _feed_sequence(h, seq: BlockSequence) -> None:
    h.update(f"seq:{seq.k_min}:{seq.rows}:{seq.cols}:{len(seq.explicit)}".encode())
    for block in seq.explicit:
        h.update(np.ascontiguousarray(block).tobytes())
    if seq.tail is not None:
        h.update(f"tail:{seq.tail.gamma!r}:{seq.tail.k0}".encode())
        h.update(np.ascontiguousarray(seq.tail.D).tobytes())


def spec_fingerprint(spec: MG1Spec) -> str:
    """md5 digest of a chain's dimensions and block values"""
    h = hashlib.md5()
    h.update(f"{spec.M0}:{spec.M1}".encode())
    h.update(np.ascontiguousarray(spec.B_minus1).tobytes())
    _feed_sequence(h, spec.Bseq)
    _feed_sequence(h, spec.Aseq)
    return h.hexdigest()


class HeadCache:
    """LRU cache of solved truncations keyed by (chain fingerprint, N, L)"""

    def __init__(self, maxsize: Optional[int] = None, enabled: Optional[bool] = None):
        self.settings = get_settings()
        self.maxsize = self.settings.cache_maxsize if maxsize is None else maxsize
        enabled = self.settings.cache_enabled if enabled is None else enabled
        self._cache: Optional[LRUCache] = None
        self._lock = threading.Lock()
        self._hits = 0
        self._misses = 0

        if enabled:
            self._cache = LRUCache(maxsize=self.maxsize)
            logger.info(f"Cache initialized with maxsize={self.maxsize}")

    @property
    def is_enabled(self) -> bool:
        return self._cache is not None

    @staticmethod
    def _get_key(spec: MG1Spec, N: int, L: int) -> Tuple[str, int, int]:
        return spec_fingerprint(spec), int(N), int(L)

    def get(self, spec: MG1Spec, N: int, L: int):
        """Get cached (trunc, factors, head) or None"""
        if not self.is_enabled:
            return None

        key = self._get_key(spec, N, L)
        with self._lock:
            result = self._cache.get(key)
            if result is not None:
                self._hits += 1
                logger.debug(f"Cache hit for N={N}, L={L}")
                return result
            self._misses += 1
        return None

    def set(self, spec: MG1Spec, N: int, L: int, value) -> None:
        if not self.is_enabled:
            return

        key = self._get_key(spec, N, L)
        with self._lock:
            self._cache[key] = value
        logger.debug(f"Cached solve for N={N}, L={L}")

    def get_stats(self) -> dict:
        """Get cache statistics"""
        total = self._hits + self._misses
        hit_rate = (self._hits / total * 100) if total > 0 else 0

        return {
            "enabled": self.is_enabled,
            "size": len(self._cache) if self._cache else 0,
            "maxsize": self.maxsize,
            "hits": self._hits,
            "misses": self._misses,
            "hit_rate": f"{hit_rate:.1f}%",
        }

    def clear(self) -> None:
        if self._cache:
            with self._lock:
                self._cache.clear()
                self._hits = 0
                self._misses = 0
            logger.info("Cache cleared")
