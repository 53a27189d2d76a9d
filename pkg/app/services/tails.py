"""Power-law H, its integrated tail F = H_I, and finite-grid class diagnostics (L, L^p, S)"""

import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np
from scipy import integrate

from app.errors import (
    CutoffTooSmall,
    GammaTooSmall,
    GridUnderflow,
    NegativeArgument,
    PreconditionViolation,
)

logger = logging.getLogger(__name__)

DEFAULT_GRID = (1e3, 1e4, 1e5, 1e6)
DEFAULT_CUTOFF = 10_000

LONG_TAILED_TOL = 1e-2
SUBEXP_TOL = 5e-2

# exp(700) is still a finite double
_MAX_LOG_RATIO = 700.0


@dataclass(frozen=True)
class PowerTail:
    """Hbar(x) = (x+1)^-gamma"""
    gamma: float

    @property
    def name(self) -> str:
        return f"PowerTail(gamma={self.gamma:g})"

    def log_survival(self, x):
        return -self.gamma * np.log1p(x)

    def survival(self, x: float) -> float:
        return survival(self, x)


@dataclass(frozen=True)
class IntegratedTail:
    """Fbar(x) = (x+1)^-(gamma-1), the integrated tail of PowerTail(gamma)"""
    source_gamma: float

    @property
    def exponent(self) -> float:
        return self.source_gamma - 1.0

    @property
    def name(self) -> str:
        return f"IntegratedTail(gamma={self.source_gamma:g})"

    def log_survival(self, x):
        return -self.exponent * np.log1p(x)

    def survival(self, x: float) -> float:
        return survival(self, x)


@dataclass(frozen=True)
class ExponentialTail:
    """Light-tailed control: survival e^-x"""

    @property
    def name(self) -> str:
        return "ExponentialTail"

    def log_survival(self, x):
        return -np.asarray(x, dtype=np.float64)

    def survival(self, x: float) -> float:
        return survival(self, x)


@dataclass
class ClassDiagnostics:
    """Ratios of a class-membership limit on an explicit grid"""
    check: str
    distribution: str
    xs: List[float]
    ratios: List[float]
    target: float
    tolerance: float
    limit_estimate: float
    verdict: bool
    params: dict = field(default_factory=dict)


def survival(F, x: float) -> float:
    """Closed-form survival of a PowerTail, IntegratedTail or ExponentialTail at x >= 0"""
    if x < 0:
        raise NegativeArgument(f"survival argument must be >= 0, got {x}")
    return float(np.exp(F.log_survival(float(x))))


def integrated_tail(H: PowerTail) -> IntegratedTail:
    """F = H_I with Fbar(x) = (gamma - 1) int_x^inf Hbar(t) dt = (x+1)^(1-gamma)"""
    if H.gamma <= 1:
        raise GammaTooSmall(f"integral of (x+1)^-{H.gamma} diverges (gamma must be > 1)")
    return IntegratedTail(source_gamma=H.gamma)


def integrated_survival_numeric(H: PowerTail, x: float) -> float:
    """(gamma - 1) int_x^inf Hbar(t) dt by adaptive quadrature"""
    value, _ = integrate.quad(lambda t: (t + 1.0) ** -H.gamma, x, np.inf, epsabs=1e-12, epsrel=1e-10)
    return (H.gamma - 1.0) * value


def _grid(xs: Optional[Sequence[float]]) -> np.ndarray:
    grid = np.asarray(DEFAULT_GRID if xs is None else xs, dtype=np.float64)
    if grid.ndim != 1 or grid.size == 0:
        raise PreconditionViolation("grid must be a non-empty 1-D sequence")
    if np.any(grid <= 0) or np.any(np.diff(grid) <= 0):
        raise PreconditionViolation("grid must be positive and strictly increasing")
    return grid


def _log_ratio(F, shifted: np.ndarray, base: np.ndarray) -> np.ndarray:
    diff = F.log_survival(shifted) - F.log_survival(base)
    return np.exp(np.clip(diff, -_MAX_LOG_RATIO, _MAX_LOG_RATIO))


def _shift_verdict(ratios: np.ndarray) -> bool:
    """Final ratio within LONG_TAILED_TOL of 1 and |ratio - 1| non-increasing along the grid."""
    dev = np.abs(ratios - 1.0)
    monotone = bool(np.all(np.diff(dev) <= 1e-15))
    return bool(dev[-1] <= LONG_TAILED_TOL) and monotone


def check_long_tailed(F, y: float = 1.0, xs: Optional[Sequence[float]] = None) -> ClassDiagnostics:
    """Fbar(x + y) / Fbar(x) on the grid; long-tailed when the ratios approach 1"""
    grid = _grid(xs)
    if np.any(grid + y < 0):
        raise GridUnderflow(f"x + y is negative at x={grid[grid + y < 0][0]:g}")
    ratios = _log_ratio(F, grid + y, grid)
    return ClassDiagnostics(
        check="long_tailed",
        distribution=F.name,
        xs=grid.tolist(),
        ratios=ratios.tolist(),
        target=1.0,
        tolerance=LONG_TAILED_TOL,
        limit_estimate=float(ratios[-1]),
        verdict=_shift_verdict(ratios),
        params={"y": y},
    )


def check_p_order(F, p: float = 2.0, xi: float = 1.0, xs: Optional[Sequence[float]] = None) -> ClassDiagnostics:
    """
    Fbar(x - xi x^(1 - 1/p)) / Fbar(x) on the grid (p-th order long-tailed criterion).

    With p = 1 the shift is the constant xi and the ratio is that of
    check_long_tailed with y = -xi.
    """
    if p < 1:
        raise PreconditionViolation(f"p must be >= 1, got {p}")
    grid = _grid(xs)
    shifted = grid - xi * grid ** (1.0 - 1.0 / p)
    if np.any(shifted < 0):
        bad = grid[shifted < 0][0]
        raise GridUnderflow(f"x - xi x^(1-1/p) is negative at x={bad:g}")
    ratios = _log_ratio(F, shifted, grid)
    return ClassDiagnostics(
        check="p_order_long_tailed",
        distribution=F.name,
        xs=grid.tolist(),
        ratios=ratios.tolist(),
        target=1.0,
        tolerance=LONG_TAILED_TOL,
        limit_estimate=float(ratios[-1]),
        verdict=_shift_verdict(ratios),
        params={"p": p, "xi": xi},
    )


def _convolution_tail_ratio(F, x: int) -> float:
    """
    P(Y1 + Y2 > x) / Fbar(x) for Y on the integers with p_k = Fbar(k-1) - Fbar(k).

    P(Y1 + Y2 > x) = Fbar(x) + sum_{j=0}^{x} p_j Fbar(x - j), summed in
    log space relative to Fbar(x) so light tails do not underflow.
    """
    j = np.arange(0, x + 1, dtype=np.float64)
    log_prev = np.where(j == 0, 0.0, F.log_survival(np.maximum(j - 1.0, 0.0)))
    log_cur = F.log_survival(j)
    with np.errstate(divide="ignore"):
        # p_0 = 0 when Fbar(0) = 1
        log_mass = log_prev + np.log1p(-np.exp(np.minimum(log_cur - log_prev, 0.0)))
    log_x = F.log_survival(float(x))
    terms = np.exp(np.clip(log_mass + F.log_survival(x - j) - log_x, None, _MAX_LOG_RATIO))
    return float(1.0 + math.fsum(terms))


def check_subexponential(F, cutoff: int = DEFAULT_CUTOFF, xs: Optional[Sequence[float]] = None) -> ClassDiagnostics:
    """
    P(Y1 + Y2 > x) / Fbar(x) by direct discrete convolution on 0..cutoff.

    The verdict uses the largest grid point <= cutoff/2; ratios near 2 indicate S.
    """
    if cutoff < 2:
        raise CutoffTooSmall(f"cutoff={cutoff} must be >= 2")
    grid = _grid(xs)
    usable = [int(x) for x in grid if x <= cutoff]
    if not any(x <= cutoff / 2 for x in usable):
        raise CutoffTooSmall(f"no grid point <= cutoff/2 = {cutoff / 2:g}")
    for x in usable:
        if not np.isfinite(F.log_survival(float(x))):
            raise CutoffTooSmall(f"survival vanishes at x={x}: ratio undefined")
    skipped = [x for x in grid if x > cutoff]
    if skipped:
        logger.debug(f"check_subexponential: grid points {skipped} exceed cutoff {cutoff}")

    ratios = np.array([_convolution_tail_ratio(F, x) for x in usable])
    verdict_index = max(i for i, x in enumerate(usable) if x <= cutoff / 2)
    final = float(ratios[verdict_index])
    return ClassDiagnostics(
        check="subexponential",
        distribution=F.name,
        xs=[float(x) for x in usable],
        ratios=ratios.tolist(),
        target=2.0,
        tolerance=SUBEXP_TOL,
        limit_estimate=final,
        verdict=abs(final - 2.0) <= SUBEXP_TOL,
        params={"cutoff": cutoff},
    )


def class_report(
    F,
    y: float = 1.0,
    p: float = 2.0,
    xi: float = 1.0,
    cutoff: int = DEFAULT_CUTOFF,
    xs: Optional[Sequence[float]] = None,
) -> List[ClassDiagnostics]:
    """L, L^p and S diagnostics for F (defaults: y=1, p=2 with xi=1, cutoff 10^4)."""
    return [
        check_long_tailed(F, y=y, xs=xs),
        check_p_order(F, p=p, xi=xi, xs=xs),
        check_subexponential(F, cutoff=cutoff, xs=xs),
    ]
