"""Matrix-analytic factors (G, K, Phi(0), R-blocks) and Ramaswami's recursion"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from app.config import get_settings
from app.errors import NoConvergence, PreconditionViolation, Reducible
from app.services.linalg import IMinusFactor, Matrix, Vector, graph_analysis, gth_stationary
from app.services.truncation import TruncatedSpec

logger = logging.getLogger(__name__)


@dataclass
class MAMFactors:
    """
    Ingredients of Ramaswami's recursion for a truncated chain.

    Rk[k - 1] holds R(k) and R0k[k - 1] holds R0(k), k = 1..N.
    """
    G: Matrix
    g: Vector
    K: Matrix
    kappa: Vector
    Phi0: Matrix
    Rk: np.ndarray
    R0k: np.ndarray
    R: Matrix
    R0: Matrix
    g_period: Optional[int]
    g_residual: float
    G10: Optional[Matrix] = None

    @property
    def N(self) -> int:
        return self.Rk.shape[0]


@dataclass
class StationaryHead:
    """pi(0..L) plus the mass not covered by the computed levels"""
    L: int
    pis: List[Vector]
    tail_mass: float
    normalization_detail: Dict[str, float] = field(default_factory=dict)
    pibar0: Optional[Vector] = None  # sum_{k >= 1} pi(k), when known in closed form
    M1: int = 0

    def level(self, k: int) -> Vector:
        """pi(k); levels past L are returned as zeros of the level >= 1 width."""
        if k <= self.L:
            return self.pis[k]
        width = self.M1 or len(self.pis[-1])
        return np.zeros(width)

    @property
    def level_masses(self) -> np.ndarray:
        return np.array([float(p.sum()) for p in self.pis])

    @property
    def head_mass(self) -> float:
        return float(self.level_masses.sum())

    def mass_above(self, n: int) -> float:
        """pibar(n) e = sum_{k > n} pi(k) e, counting the uncovered tail mass."""
        masses = self.level_masses
        return float(masses[n + 1:].sum()) + self.tail_mass


def _g_map(A_stack: np.ndarray, G: Matrix) -> Matrix:
    """sum_{m=-1}^{N} A(m) G^(m+1) by Horner's rule in G"""
    S = A_stack[-1].copy()
    for block in A_stack[-2::-1]:
        S = block + S @ G
    return S


def g_residual(trunc: TruncatedSpec, G: Matrix) -> float:
    """||G - sum_m A(m) G^(m+1)||_inf"""
    return float(np.max(np.abs(G - _g_map(trunc.A_stack, G))))


def compute_G(trunc: TruncatedSpec, tol: Optional[float] = None, max_iter: Optional[int] = None) -> Matrix:
    """
    Minimal nonnegative solution of G = sum_{m=-1}^{N} A(m) G^(m+1).

    Natural iteration from G_0 = O, stopped on the successive-difference
    infinity norm. The iterates increase entrywise; a decrease beyond
    rounding is logged.

    Raises:
        NoConvergence: max_iter reached (drift not negative, or tol too tight)
    """
    settings = get_settings()
    if tol is None:
        tol = settings.g_tol
    if max_iter is None:
        max_iter = settings.g_max_iter
    if max_iter < 1:
        raise PreconditionViolation(f"max_iter must be >= 1, got {max_iter}")

    A_stack = trunc.A_stack
    G = np.zeros((trunc.M1, trunc.M1))
    non_monotone = 0
    for n in range(1, max_iter + 1):
        G_next = _g_map(A_stack, G)
        if np.any(G_next < G - 1e-15):
            non_monotone += 1
        diff = float(np.max(np.abs(G_next - G)))
        G = G_next
        if diff <= tol:
            break
    else:
        raise NoConvergence(f"G iteration did not reach tol={tol:.1e} in {max_iter} steps (last diff {diff:.3e})")

    if non_monotone:
        logger.warning(f"G iteration decreased entrywise in {non_monotone} of {n} steps")
    residual = g_residual(trunc, G)
    if residual > 10 * tol:
        logger.warning(f"G residual {residual:.3e} exceeds 10 * tol = {10 * tol:.1e}")
    logger.debug(f"G converged for N={trunc.N} in {n} iterations, residual {residual:.3e}")
    return G


def _stationary_of_closed_class(M: Matrix) -> Vector:
    """GTH on M, falling back to its unique closed class when M has transient states."""
    try:
        return gth_stationary(M)
    except Reducible:
        analysis = graph_analysis(M)
        if len(analysis.closed_classes) != 1:
            raise
        members = np.flatnonzero(np.asarray(analysis.labels) == analysis.closed_classes[0])
        x = np.zeros(M.shape[0])
        x[members] = gth_stationary(M[np.ix_(members, members)])
        return x


def _horner_tails(blocks: np.ndarray, G: Matrix) -> np.ndarray:
    """S(k) = sum_{m=0}^{n-1-k} blocks[k + m] G^m for every k, computed backwards."""
    out = np.empty_like(blocks)
    S = blocks[-1].copy()
    out[-1] = S
    for k in range(blocks.shape[0] - 2, -1, -1):
        S = blocks[k] + S @ G
        out[k] = S
    return out


def compute_factors(trunc: TruncatedSpec, G: Matrix) -> MAMFactors:
    """
    K, Phi(0), R(k), R0(k), kappa and g from G.

    Phi(0) = sum_{m=0}^{N} A(m) G^m and R(k) = sum_{m=0}^{N-k} A(k+m) G^m (I - Phi(0))^-1,
    with R0(k) built from the B blocks. The level-0 censored matrix is
    K = B(0) + sum_{m>=1} B(m) G^(m-1) G10 with G10 = (I - Phi(0))^-1 B(-1),
    which reduces to B(0) + sum B(m) G^m when B(-1) = A(-1).
    """
    N, M0, M1 = trunc.N, trunc.M0, trunc.M1

    # A_stack[1:] are A(0..N)
    S_A = _horner_tails(np.array(trunc.A_stack[1:]), G)
    Phi0 = S_A[0]
    phi = IMinusFactor(Phi0)

    Rk = phi.solve_right(S_A[1:].reshape(N * M1, M1)).reshape(N, M1, M1)
    S_B = _horner_tails(np.array(trunc.B_up), G)
    R0k = phi.solve_right(S_B.reshape(N * M0, M1)).reshape(N, M0, M1)

    G10 = phi.solve(trunc.B_minus1)
    K = trunc.B0 + S_B[0] @ G10
    kappa = gth_stationary(K)
    kappa_res = float(np.max(np.abs(kappa @ K - kappa)))
    if kappa_res > 1e-12:
        logger.warning(f"kappa K = kappa residual {kappa_res:.3e}")

    g = _stationary_of_closed_class(G)
    analysis = graph_analysis(G)
    period = analysis.period if analysis.period is not None else analysis.closed_period

    return MAMFactors(
        G=G,
        g=g,
        K=K,
        kappa=kappa,
        Phi0=Phi0,
        Rk=Rk,
        R0k=R0k,
        R=Rk.sum(axis=0),
        R0=R0k.sum(axis=0),
        g_period=period,
        g_residual=g_residual(trunc, G),
        G10=G10,
    )


def ramaswami(trunc: TruncatedSpec, factors: MAMFactors, L: int) -> StationaryHead:
    """
    pi(0..L) by pi(k) = pi(0) R0(k) + sum_{l=1}^{k-1} pi(l) R(k - l).

    pi(0) = kappa / (kappa e + kappa R0 (I - R)^-1 e) normalizes the total
    mass to 1. The denominator kappa R0 (I - R)^-1 e alone is recorded in
    normalization_detail as ``literal_pi0_mass`` for comparison.
    """
    if L < 0:
        raise PreconditionViolation(f"L must be >= 0, got {L}")
    N, M1 = trunc.N, trunc.M1
    kappa = factors.kappa

    factor_R = IMinusFactor(factors.R)
    w = factor_R.solve(np.ones(M1))  # (I - R)^-1 e
    up_mass = float(kappa @ factors.R0 @ w)
    denom = float(kappa.sum()) + up_mass
    pi0 = kappa / denom
    pibar0 = factor_R.solve_right(pi0 @ factors.R0)

    detail = {
        "kappa_e": float(kappa.sum()),
        "kappa_R0_IminusR_inv_e": up_mass,
        "total_mass_denominator": denom,
        "pi0_mass": float(pi0.sum()),
        "literal_pi0_mass": float(kappa.sum()) / up_mass if up_mass > 0 else float("inf"),
    }
    logger.debug(
        f"pi(0) mass {detail['pi0_mass']:.15g} (literal denominator would give {detail['literal_pi0_mass']:.15g})"
    )

    P = np.zeros((L + 1, M1))
    Rrev = factors.Rk[::-1]
    for k in range(1, L + 1):
        lo = max(1, k - N)
        acc = np.tensordot(P[lo:k], Rrev[N - k + lo:N], axes=([0, 1], [0, 1])) if k > lo else np.zeros(M1)
        if k <= N:
            acc = acc + pi0 @ factors.R0k[k - 1]
        P[k] = acc

    low = float(P.min()) if L >= 1 else 0.0
    if low < -1e-14:
        logger.warning(f"Ramaswami produced negative entry {low:.3e}; clipped to 0")
    np.clip(P, 0.0, None, out=P)

    pis = [pi0] + [P[k].copy() for k in range(1, L + 1)]
    tail_mass = 1.0 - float(pi0.sum()) - float(P[1:].sum())
    if tail_mass < 0:
        if tail_mass < -1e-12:
            logger.warning(f"negative tail mass {tail_mass:.3e} clamped to 0")
        tail_mass = 0.0

    return StationaryHead(L=L, pis=pis, tail_mass=tail_mass, normalization_detail=detail, pibar0=pibar0, M1=M1)


def check_g_aperiodic(factors: MAMFactors) -> dict:
    """ok iff G has a single closed (recurrent) class and that class is aperiodic"""
    analysis = graph_analysis(factors.G)
    period = analysis.closed_period
    if period is None:
        return {"ok": False, "period": analysis.period or 0}
    return {"ok": period == 1, "period": period}


__all__ = [
    "MAMFactors",
    "StationaryHead",
    "compute_G",
    "g_residual",
    "compute_factors",
    "ramaswami",
    "check_g_aperiodic",
]
