"""M/G/1-type chain model: block sequences, exact tail sums and assumption checks"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from app.config import get_settings
from app.errors import (
    ExponentMismatch,
    GammaTooSmall,
    IndexOutOfDomain,
    InvalidSpec,
    ToleranceUnreachable,
)
from app.services.linalg import Matrix, Vector, as_matrix, frozen, graph_analysis, gth_stationary

logger = logging.getLogger(__name__)

# Levels at which assumption3_constants reports numeric ratios
RATIO_CHECK_NS = (100, 1_000, 10_000)


@dataclass(frozen=True)
class PowerTailModel:
    """Blocks D * (k^-gamma - (k+1)^-gamma) for k >= k0"""
    gamma: float
    k0: int
    D: Matrix

    def __post_init__(self):
        object.__setattr__(self, "gamma", float(self.gamma))
        object.__setattr__(self, "k0", int(self.k0))
        object.__setattr__(self, "D", frozen(as_matrix(self.D, "tail D")))

    def block(self, k: int) -> Matrix:
        return self.D * (float(k) ** -self.gamma - float(k + 1) ** -self.gamma)

    def mass_from(self, m: int) -> Matrix:
        """Sum of tail blocks over k >= max(m, k0); telescopes to D * max(m, k0)^-gamma."""
        return self.D * float(max(m, self.k0)) ** -self.gamma


@dataclass(frozen=True)
class BlockSequence:
    """
    Blocks X(k) for k >= k_min.

    explicit[i] is block k_min + i; blocks between the explicit region and
    the tail's k0 are zero, as are all blocks past the explicit region when
    there is no tail. ``level0_cols`` overrides the column count of block 0
    (the B(0) block is M0 x M0 while B(k), k >= 1, is M0 x M1).
    """
    k_min: int
    explicit: Tuple[Matrix, ...]
    rows: int
    cols: int
    tail: Optional[PowerTailModel] = None
    level0_cols: Optional[int] = None

    def __post_init__(self):
        blocks = tuple(frozen(as_matrix(b, f"block {self.k_min + i}")) for i, b in enumerate(self.explicit))
        object.__setattr__(self, "explicit", blocks)

    @property
    def explicit_end(self) -> int:
        """One past the last explicit index"""
        return self.k_min + len(self.explicit)

    @property
    def support_max(self) -> Optional[int]:
        """Largest index with a possibly non-zero block (None for a power tail)."""
        if self.tail is not None:
            return None
        return self.explicit_end - 1

    def shape_at(self, k: int) -> Tuple[int, int]:
        if k == 0 and self.level0_cols is not None:
            return self.rows, self.level0_cols
        return self.rows, self.cols

    def explicit_items(self):
        """(k, block) pairs of the explicit region, clipped below the tail's k0."""
        stop = self.explicit_end if self.tail is None else min(self.explicit_end, self.tail.k0)
        for k in range(self.k_min, stop):
            yield k, self.explicit[k - self.k_min]


@dataclass(frozen=True)
class MG1Spec:
    """The transition matrix P of an M/G/1-type chain"""
    M0: int
    M1: int
    B_minus1: Matrix
    Bseq: BlockSequence
    Aseq: BlockSequence

    def __post_init__(self):
        object.__setattr__(self, "B_minus1", frozen(as_matrix(self.B_minus1, "B_minus1")))

    @property
    def max_increment(self) -> Optional[int]:
        """Largest level increment with non-zero mass, None when a tail is present."""
        a, b = self.Aseq.support_max, self.Bseq.support_max
        if a is None or b is None:
            return None
        return max(a, b)


def make_sequence(kind: str, M0: int, M1: int, explicit, tail: Optional[PowerTailModel] = None) -> BlockSequence:
    """Build the A (kind="A") or B (kind="B") sequence with the right index origin and shapes."""
    if kind == "A":
        return BlockSequence(k_min=-1, explicit=tuple(explicit), rows=M1, cols=M1, tail=tail)
    if kind == "B":
        return BlockSequence(k_min=0, explicit=tuple(explicit), rows=M0, cols=M1, tail=tail, level0_cols=M0)
    raise ValueError(f"unknown sequence kind {kind!r}")


@dataclass
class Violation:
    """A failed check of validate_spec"""
    clause: str
    message: str

    def __str__(self) -> str:
        return f"[{self.clause}] {self.message}"


@dataclass
class DriftReport:
    """Assumption 1 ingredients: varpi, mean increments, drift sigma"""
    A: Matrix
    varpi: Vector
    mbar_A: Vector
    sigma: float
    mbar_B_e: Vector
    flags: Dict[str, bool] = field(default_factory=dict)

    @property
    def assumption1_ok(self) -> bool:
        # irreducible_P_sufficient is warning-level only
        required = {k: v for k, v in self.flags.items() if k != "irreducible_P_sufficient"}
        return (
            self.sigma < 0
            and bool(np.all(np.isfinite(self.mbar_B_e)))
            and all(required.values())
        )


@dataclass
class SeriesValue:
    """Bracketed value of sum_{l >= m} l^-gamma"""
    value: float
    lower: float
    upper: float
    terms: int


@dataclass
class Assumption3Constants:
    """Limits c = lim tail_sum_doublebar(N) e / Fbar(N) and their numeric diagnostics"""
    c_A: Vector
    c_B: Vector
    c_A_star: Vector
    c_B_star: Vector
    ratios_A: Dict[int, Vector] = field(default_factory=dict)
    ratios_B: Dict[int, Vector] = field(default_factory=dict)
    flags: List[str] = field(default_factory=list)


# ---------------------------------------------------------------------------
# Series
# ---------------------------------------------------------------------------

def _bracket_width(gamma: float, M: int) -> float:
    """Width of the convexity bracket for sum_{l >= M} l^-gamma."""
    return ((M - 0.5) ** (1 - gamma) - M ** (1 - gamma)) / (gamma - 1) - 0.5 * M ** -gamma


def hurwitz_tail(
    gamma: float,
    m: int,
    abs_tol: Optional[float] = None,
    max_terms: Optional[int] = None,
) -> SeriesValue:
    """
    sum_{l >= m} l^-gamma for gamma > 1, m >= 1, with absolute error <= abs_tol.

    Partial sum up to M - 1, then the remainder bracketed for the convex
    decreasing f(x) = x^-gamma:
        int_M^inf f + f(M)/2  <=  sum_{l >= M} f(l)  <=  int_{M-1/2}^inf f.
    The midpoint of the bracket is returned.
    """
    settings = get_settings()
    if abs_tol is None:
        abs_tol = settings.series_abs_tol
    if max_terms is None:
        max_terms = settings.series_max_terms
    if abs_tol < 1e-15:
        raise ToleranceUnreachable(f"abs_tol {abs_tol:.1e} below 1e-15")
    if gamma <= 1:
        raise GammaTooSmall(f"gamma must be > 1, got {gamma}")
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m}")

    M = max(m, 16)
    while 0.5 * _bracket_width(gamma, M) > abs_tol and M - m < max_terms:
        M *= 2
    M = min(M, m + max_terms)
    if 0.5 * _bracket_width(gamma, M) > abs_tol:
        raise ToleranceUnreachable(
            f"sum l^-{gamma} from {m}: {max_terms} terms cannot reach abs_tol {abs_tol:.1e}"
        )

    partial = 0.0
    if M > m:
        terms = np.arange(m, M, dtype=np.float64) ** -gamma
        partial = float(np.sum(terms[::-1]))
    lower = partial + M ** (1 - gamma) / (gamma - 1) + 0.5 * M ** -gamma
    upper = partial + (M - 0.5) ** (1 - gamma) / (gamma - 1)
    return SeriesValue(value=0.5 * (lower + upper), lower=lower, upper=upper, terms=M - m)


def power_tail_first_moment(tail: PowerTailModel, abs_tol: Optional[float] = None) -> float:
    """sum_{k >= k0} k (k^-g - (k+1)^-g) = k0^(1-g) + sum_{k >= k0+1} k^-g"""
    return tail.k0 ** (1 - tail.gamma) + hurwitz_tail(tail.gamma, tail.k0 + 1, abs_tol).value


# ---------------------------------------------------------------------------
# Block access and tail sums
# ---------------------------------------------------------------------------

def block_at(seq: BlockSequence, k: int) -> Matrix:
    """Block X(k): explicit, power-tail, or zero"""
    if k < seq.k_min:
        raise IndexOutOfDomain(f"block index {k} below k_min={seq.k_min}")
    if seq.tail is not None and k >= seq.tail.k0:
        return seq.tail.block(k)
    if k < seq.explicit_end:
        return np.array(seq.explicit[k - seq.k_min])
    return np.zeros(seq.shape_at(k))


def tail_sum_bar(seq: BlockSequence, N: int) -> Matrix:
    """Xbar(N) = sum_{l >= N+1} X(l), exact (power tails telescope)"""
    if N < seq.k_min:
        raise IndexOutOfDomain(f"N={N} below k_min={seq.k_min}")
    total = np.zeros((seq.rows, seq.cols))
    for k, block in seq.explicit_items():
        if k >= N + 1:
            total += block
    if seq.tail is not None:
        total += seq.tail.mass_from(N + 1)
    return total


def tail_sum_doublebar(seq: BlockSequence, N: int, abs_tol: Optional[float] = None) -> Matrix:
    """
    Xbarbar(N) = sum_{l >= N+1} Xbar(l).

    Explicit blocks X(j) contribute (j - N - 1) X(j); the power tail
    contributes D * (#{l >= N+1 : l+1 <= k0} k0^-g + sum_{m >= max(N+2, k0+1)} m^-g).
    """
    if abs_tol is None:
        abs_tol = get_settings().series_abs_tol
    if abs_tol < 1e-15:
        raise ToleranceUnreachable(f"abs_tol {abs_tol:.1e} below 1e-15")
    if N < seq.k_min:
        raise IndexOutOfDomain(f"N={N} below k_min={seq.k_min}")

    total = np.zeros((seq.rows, seq.cols))
    for k, block in seq.explicit_items():
        if k > N + 1:
            total += (k - N - 1) * block
    tail = seq.tail
    if tail is not None:
        scale = max(float(np.max(np.abs(tail.D))), 1e-300)
        flat = max(0, tail.k0 - N - 1) * float(tail.k0) ** -tail.gamma
        series = hurwitz_tail(tail.gamma, max(N + 2, tail.k0 + 1), abs_tol / scale)
        total += tail.D * (flat + series.value)
    return total


def first_moment(seq: BlockSequence, k_from: int = 1) -> Vector:
    """sum_{k >= k_from} k X(k) e (explicit part exact, tail part via bracketed series)"""
    moment = np.zeros(seq.rows)
    for k, block in seq.explicit_items():
        if k >= k_from:
            moment += k * block.sum(axis=1)
    tail = seq.tail
    if tail is not None:
        if tail.gamma <= 1:
            return np.full(seq.rows, np.inf)
        if k_from > tail.k0:
            # same telescoping identity started at k_from instead of k0
            m = float(k_from) ** (1 - tail.gamma) + hurwitz_tail(tail.gamma, k_from + 1).value
        else:
            m = power_tail_first_moment(tail)
        moment += m * tail.D.sum(axis=1)
    return moment


def assemble_A(spec: MG1Spec) -> Matrix:
    """A = sum_{k >= -1} A(k)"""
    return block_at(spec.Aseq, -1) + tail_sum_bar(spec.Aseq, -1)


# ---------------------------------------------------------------------------
# Assumption checks
# ---------------------------------------------------------------------------

def _check_sequence_shapes(name: str, seq: BlockSequence, violations: List[Violation]) -> None:
    for i, block in enumerate(seq.explicit):
        k = seq.k_min + i
        if block.shape != seq.shape_at(k):
            violations.append(Violation("dimensions", f"{name}({k}) has shape {block.shape}, expected {seq.shape_at(k)}"))
        if np.any(block < 0):
            violations.append(Violation("nonnegative", f"{name}({k}) has negative entries"))
    tail = seq.tail
    if tail is None:
        return
    if tail.D.shape != (seq.rows, seq.cols):
        violations.append(Violation("dimensions", f"{name} tail D has shape {tail.D.shape}, expected {(seq.rows, seq.cols)}"))
    if np.any(tail.D < 0):
        violations.append(Violation("nonnegative", f"{name} tail D has negative entries"))
    if not tail.gamma > 1:
        violations.append(Violation("gamma", f"{name} tail gamma={tail.gamma} must be > 1"))
    if tail.k0 < 1:
        violations.append(Violation("tail_k0", f"{name} tail k0={tail.k0} must be >= 1"))
    if seq.explicit_end > tail.k0:
        violations.append(Violation("tail_k0", f"{name} explicit blocks overlap the tail region k >= {tail.k0}"))


def validate_spec(spec: MG1Spec, tol: Optional[float] = None) -> List[Violation]:
    """
    Check nonnegativity, shapes, stochasticity, gamma range and irreducibility of A.

    Irreducibility of P itself is only checked through a sufficient
    condition (A irreducible, B(-1) != O, some B(k) != O for k >= 1) and
    reported as a warning.
    """
    if tol is None:
        tol = get_settings().stochastic_tol
    violations: List[Violation] = []

    if spec.M0 < 1 or spec.M1 < 1:
        violations.append(Violation("dimensions", f"M0={spec.M0}, M1={spec.M1} must be positive"))
        return violations
    if spec.B_minus1.shape != (spec.M1, spec.M0):
        violations.append(Violation("dimensions", f"B(-1) has shape {spec.B_minus1.shape}, expected {(spec.M1, spec.M0)}"))
    if np.any(spec.B_minus1 < 0):
        violations.append(Violation("nonnegative", "B(-1) has negative entries"))
    _check_sequence_shapes("A", spec.Aseq, violations)
    _check_sequence_shapes("B", spec.Bseq, violations)
    if any(v.clause in ("dimensions", "tail_k0") for v in violations):
        return violations

    A_up = tail_sum_bar(spec.Aseq, -1)  # sum_{k >= 0} A(k)
    rows0 = block_at(spec.Bseq, 0).sum(axis=1) + tail_sum_bar(spec.Bseq, 0).sum(axis=1)
    rows1 = spec.B_minus1.sum(axis=1) + A_up.sum(axis=1)
    rows2 = block_at(spec.Aseq, -1).sum(axis=1) + A_up.sum(axis=1)
    for label, rows in (("level 0", rows0), ("level 1", rows1), ("levels >= 2", rows2)):
        err = float(np.max(np.abs(rows - 1.0)))
        if err > tol:
            violations.append(Violation("stochastic", f"{label} rows deviate from 1 by {err:.3e}"))

    A = assemble_A(spec)
    analysis = graph_analysis(A)
    if not analysis.is_strongly_connected:
        violations.append(Violation("irreducible_A", f"A has {analysis.num_classes} communicating classes"))
    elif not _irreducible_P_sufficient(spec):
        logger.warning(
            "Irreducibility of P not certified: the sufficient condition "
            "(A irreducible, B(-1) != O, some B(k) != O) does not hold"
        )
    else:
        logger.debug("P irreducibility: sufficient condition holds (sufficient-only check)")

    return violations


def _irreducible_P_sufficient(spec: MG1Spec) -> bool:
    if not np.any(spec.B_minus1 > 0):
        return False
    up = tail_sum_bar(spec.Bseq, 0)
    return bool(np.any(up > 0))


def drift_report(spec: MG1Spec) -> DriftReport:
    """varpi, mbar_A, sigma = varpi mbar_A and mbar_B e, with per-clause Assumption 1 flags"""
    violations = validate_spec(spec)
    if violations:
        raise InvalidSpec("; ".join(str(v) for v in violations))

    A = assemble_A(spec)
    varpi = gth_stationary(A)
    mbar_A = first_moment(spec.Aseq, k_from=1) - block_at(spec.Aseq, -1).sum(axis=1)
    sigma = float(varpi @ mbar_A)
    mbar_B = first_moment(spec.Bseq, k_from=1)

    flags = {
        "irreducible_P_sufficient": _irreducible_P_sufficient(spec),
        "irreducible_A": True,
        "mbar_B_finite": bool(np.all(np.isfinite(mbar_B))),
        "negative_drift": sigma < 0,
    }
    report = DriftReport(A=A, varpi=varpi, mbar_A=mbar_A, sigma=sigma, mbar_B_e=mbar_B, flags=flags)
    logger.info(f"Drift: sigma={sigma:.12g}, assumption1_ok={report.assumption1_ok}")
    return report


def _sequence_constant(
    name: str,
    seq: BlockSequence,
    gamma_F: float,
    flags: List[str],
) -> Tuple[np.ndarray, np.ndarray]:
    """(c, c_star) for one sequence against Fbar(x) = (x+1)^(1 - gamma_F)."""
    zero = np.zeros(seq.rows)
    tail = seq.tail
    if tail is None or not np.any(tail.D > 0):
        flags.append(f"{name}_finite_support")
        return zero, zero
    if abs(tail.gamma - gamma_F) <= 1e-12:
        c_star = tail.D.sum(axis=1)
        return c_star / (gamma_F - 1), c_star
    if tail.gamma > gamma_F:
        flags.append(f"{name}_lighter_tail")
        return zero, zero
    raise ExponentMismatch(
        f"{name} tail gamma={tail.gamma} is heavier than F (gamma={gamma_F}): limit is infinite"
    )


def assumption3_constants(spec: MG1Spec, F) -> Assumption3Constants:
    """
    c_A, c_B of Assumption 3 for power tails against F = H_I.

    For a tail with the same exponent as F's source, c = D e / (gamma - 1)
    (and c* = D e); finite-support or lighter tails give c = 0 and a flag.
    Both zero is an ExponentMismatch: Assumption 3 needs a non-zero vector.
    """
    gamma_F = F.source_gamma
    flags: List[str] = []
    c_A, c_A_star = _sequence_constant("A", spec.Aseq, gamma_F, flags)
    c_B, c_B_star = _sequence_constant("B", spec.Bseq, gamma_F, flags)
    if not np.any(c_A > 0) and not np.any(c_B > 0):
        raise ExponentMismatch("c_A and c_B are both zero: Assumption 3 requires a non-zero vector")

    result = Assumption3Constants(c_A=c_A, c_B=c_B, c_A_star=c_A_star, c_B_star=c_B_star, flags=flags)
    for N in RATIO_CHECK_NS:
        fbar = F.survival(N)
        result.ratios_A[N] = tail_sum_doublebar(spec.Aseq, N).sum(axis=1) / fbar
        result.ratios_B[N] = tail_sum_doublebar(spec.Bseq, N).sum(axis=1) / fbar
    logger.info(f"Assumption 3: c_A={c_A.tolist()}, c_B={c_B.tolist()}, flags={flags}")
    return result


def phase_permuted(spec: MG1Spec, perm: List[int]) -> MG1Spec:
    """Relabel the level >= 1 phases of spec by perm (conjugates every M1-indexed axis)."""
    p = np.asarray(perm)

    def conj_A(block: Matrix) -> Matrix:
        return block[np.ix_(p, p)]

    def perm_cols(block: Matrix) -> Matrix:
        return block[:, p]

    A = spec.Aseq
    B = spec.Bseq
    A_tail = None if A.tail is None else PowerTailModel(A.tail.gamma, A.tail.k0, conj_A(A.tail.D))
    B_tail = None if B.tail is None else PowerTailModel(B.tail.gamma, B.tail.k0, perm_cols(B.tail.D))
    B_explicit = [blk if k == 0 else perm_cols(blk) for k, blk in zip(range(B.k_min, B.explicit_end), B.explicit)]
    return MG1Spec(
        M0=spec.M0,
        M1=spec.M1,
        B_minus1=spec.B_minus1[p, :],
        Bseq=make_sequence("B", spec.M0, spec.M1, B_explicit, B_tail),
        Aseq=make_sequence("A", spec.M0, spec.M1, [conj_A(b) for b in A.explicit], A_tail),
    )


__all__ = [
    "PowerTailModel",
    "BlockSequence",
    "MG1Spec",
    "Violation",
    "DriftReport",
    "SeriesValue",
    "Assumption3Constants",
    "make_sequence",
    "hurwitz_tail",
    "power_tail_first_moment",
    "block_at",
    "tail_sum_bar",
    "tail_sum_doublebar",
    "first_moment",
    "assemble_A",
    "validate_spec",
    "drift_report",
    "assumption3_constants",
    "phase_permuted",
]
