"""Solve pipeline: truncate -> G -> factors -> stationary head"""

import logging
import threading
import time
from dataclasses import dataclass
from typing import Optional

from app.config import get_settings
from app.services.cache import HeadCache
from app.services.mam import MAMFactors, StationaryHead, compute_factors, compute_G, ramaswami
from app.services.model import MG1Spec
from app.services.truncation import TruncatedSpec, li_truncate

logger = logging.getLogger(__name__)


@dataclass
class SolveResult:
    """A solved LI truncation"""
    trunc: TruncatedSpec
    factors: MAMFactors
    head: StationaryHead
    elapsed_ms: float = 0.0
    cached: bool = False


class ChainSolver:
    """
    Solves LI truncations of a chain.

    Flow:
    1. Cache check on (chain, N, L)
    2. li_truncate
    3. compute_G, compute_factors
    4. ramaswami up to level L
    """

    def __init__(self, cache: Optional[HeadCache] = None):
        self.settings = get_settings()
        self.cache = cache if cache is not None else HeadCache()
        self._stats_lock = threading.Lock()
        self._stats = {
            "solves": 0,
            "cache_hits": 0,
            "total_solve_ms": 0.0,
        }

    def default_levels(self, N: int) -> int:
        return self.settings.level_factor * N

    def solve(self, spec: MG1Spec, N: int, L: Optional[int] = None) -> SolveResult:
        """Stationary head of the N-truncation of spec on levels 0..L (default level_factor * N)."""
        if L is None:
            L = self.default_levels(N)

        cached = self.cache.get(spec, N, L)
        if cached is not None:
            with self._stats_lock:
                self._stats["cache_hits"] += 1
            return SolveResult(trunc=cached.trunc, factors=cached.factors, head=cached.head,
                               elapsed_ms=0.0, cached=True)

        t0 = time.perf_counter()
        trunc = li_truncate(spec, N)
        G = compute_G(trunc)
        factors = compute_factors(trunc, G)
        head = ramaswami(trunc, factors, L)
        elapsed_ms = (time.perf_counter() - t0) * 1000

        result = SolveResult(trunc=trunc, factors=factors, head=head, elapsed_ms=round(elapsed_ms, 2))
        self.cache.set(spec, N, L, result)
        with self._stats_lock:
            self._stats["solves"] += 1
            self._stats["total_solve_ms"] += elapsed_ms
        logger.info(f"Solved N={N}, L={L} in {elapsed_ms:.1f} ms (tail mass {head.tail_mass:.3e})")
        return result

    def get_stats(self) -> dict:
        with self._stats_lock:
            stats = dict(self._stats)
        stats["total_solve_ms"] = round(stats["total_solve_ms"], 2)
        stats["cache"] = self.cache.get_stats()
        return stats


_solver: Optional[ChainSolver] = None
_solver_lock = threading.Lock()


def get_solver() -> ChainSolver:
    """Get the process-wide solver"""
    global _solver
    if _solver is None:
        with _solver_lock:
            if _solver is None:
                _solver = ChainSolver()
    return _solver
