"""Reference solutions, the augmentation oracle, total-variation errors and convergence sweeps"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from app.config import get_settings
from app.errors import (
    CapTooSmall,
    DimensionMismatch,
    NonNegativeDrift,
    PreconditionViolation,
    ReferenceUnstable,
)
from app.services.linalg import gth_stationary
from app.services.mam import StationaryHead, check_g_aperiodic
from app.services.model import MG1Spec, assumption3_constants, drift_report
from app.services.pipeline import ChainSolver, get_solver
from app.services.tails import IntegratedTail
from app.services.truncation import TruncatedSpec

logger = logging.getLogger(__name__)

# Gap allowed between two references of a chain with bounded increments,
# where truncation past the support is exact
EXACT_GAP_TOL = 1e-12

# sum |x| over a signed difference of two distributions is twice their
# total-variation distance; tv / Fbar(N) and tv / pibar(N)e tend to this
# multiple of the theoretical limits
L1_FACTOR = 2.0

# Verdict values
PASS = "pass"
FAIL = "fail"
NOT_APPLICABLE = "not_applicable"


@dataclass
class ReferenceSolution:
    """pi_ref = LI truncation at N_ref, with the gap to the 2 N_ref truncation"""
    N_ref: int
    L_ref: int
    head: StationaryHead
    stability_gap: float
    gap_slack: float = 0.0
    gap_threshold: float = 0.0
    g_check: Dict[str, object] = field(default_factory=dict)
    check_head: Optional[StationaryHead] = None  # the 2 N_ref truncation on the same levels


@dataclass
class ConvergenceRow:
    """Errors of the N-truncation against the reference"""
    N: int
    L: int
    tv: float
    tv_slack: float
    Fbar: float
    ratio_F: float
    tail_mass_ref: float
    ratio_tail: float
    levelwise: Dict[int, float] = field(default_factory=dict)
    level_diff_min: Dict[int, float] = field(default_factory=dict)

    @property
    def tv_distance(self) -> float:
        """Total-variation distance, tv / 2"""
        return self.tv / L1_FACTOR

    @property
    def ratio_F_distance(self) -> float:
        return self.ratio_F / L1_FACTOR

    @property
    def ratio_tail_distance(self) -> float:
        return self.ratio_tail / L1_FACTOR


@dataclass
class ConvergenceReport:
    rows: List[ConvergenceRow]
    theoretical_constant: float
    constants_detail: Dict[str, object]
    verdicts: Dict[str, str]
    pibar_ratios: Dict[int, float] = field(default_factory=dict)
    findings: List[str] = field(default_factory=list)
    reference: Dict[str, float] = field(default_factory=dict)
    verdict_tol: float = 0.0
    applicable: bool = True
    targets: Dict[str, float] = field(default_factory=dict)
    pibar_source: str = "reference"

    @property
    def passed(self) -> bool:
        return all(v != FAIL for v in self.verdicts.values())


# ---------------------------------------------------------------------------
# Distances
# ---------------------------------------------------------------------------

def tv_error(a: StationaryHead, b: StationaryHead) -> Tuple[float, float]:
    """
    (sum_{k,i} |a(k,i) - b(k,i)| over the union of computed levels, a.tail_mass + b.tail_mass).

    Levels missing from one head count as zero there.
    """
    if a.pis[0].shape != b.pis[0].shape:
        raise DimensionMismatch(f"level-0 widths differ: {a.pis[0].shape} vs {b.pis[0].shape}")
    if a.L >= 1 and b.L >= 1 and a.pis[1].shape != b.pis[1].shape:
        raise DimensionMismatch(f"level widths differ: {a.pis[1].shape} vs {b.pis[1].shape}")

    total = float(np.abs(a.pis[0] - b.pis[0]).sum())
    common = min(a.L, b.L)
    if common >= 1:
        total += float(np.abs(np.array(a.pis[1:common + 1]) - np.array(b.pis[1:common + 1])).sum())
    longer = a if a.L > b.L else b
    if longer.L > common:
        total += float(np.array(longer.pis[common + 1:]).sum())
    return total, a.tail_mass + b.tail_mass


# ---------------------------------------------------------------------------
# Augmentation oracle
# ---------------------------------------------------------------------------

def _oracle_matrix(trunc: TruncatedSpec, L_cap: int) -> np.ndarray:
    """Transition matrix of P^(N) on levels 0..L_cap, jumps past L_cap redirected to L_cap."""
    M0, M1, N = trunc.M0, trunc.M1, trunc.N
    n = M0 + L_cap * M1

    def cols(level: int) -> slice:
        if level == 0:
            return slice(0, M0)
        start = M0 + (level - 1) * M1
        return slice(start, start + M1)

    P = np.zeros((n, n))
    P[cols(0), cols(0)] = trunc.B0
    for j in range(1, N + 1):
        P[cols(0), cols(min(j, L_cap))] += trunc.B_up[j - 1]

    A = trunc.A_stack  # A[m + 1] is A(m)
    for level in range(1, L_cap + 1):
        rows = cols(level)
        if level == 1:
            P[rows, cols(0)] = trunc.B_minus1
        else:
            P[rows, cols(level - 1)] += A[0]
        for m in range(0, N + 1):
            P[rows, cols(min(level + m, L_cap))] += A[m + 1]
    return P


def _extrapolated_tail(masses: np.ndarray, N: int) -> float:
    """Mass beyond the cap from the geometric decay of level masses away from the cap."""
    L_cap = masses.size - 1
    b = max(1, L_cap - N - 1)
    a = max(1, b // 2)
    if b <= a:
        raise CapTooSmall(f"L_cap={L_cap} leaves no levels to estimate the decay (N={N})")
    if masses[a] <= 0.0:
        return 0.0
    if masses[b] <= 0.0:
        return 0.0
    r = (masses[b] / masses[a]) ** (1.0 / (b - a))
    if r >= 1.0:
        return float("inf")
    return float(masses[b] * r ** (L_cap - b) * r / (1.0 - r))


def oracle_solve_finite(trunc: TruncatedSpec, L_cap: int) -> StationaryHead:
    """
    Stationary head of P^(N) augmented at L_cap, solved directly by GTH.

    The head's tail_mass is the geometric extrapolation of the mass the
    augmentation folds into the cap.

    Raises:
        CapTooSmall: the extrapolated mass beyond L_cap exceeds oracle_tail_max
    """
    if L_cap < trunc.N:
        raise PreconditionViolation(f"L_cap={L_cap} must be >= N={trunc.N}")
    settings = get_settings()
    x = gth_stationary(_oracle_matrix(trunc, L_cap))

    M0, M1 = trunc.M0, trunc.M1
    pis = [x[:M0]] + [x[M0 + (k - 1) * M1:M0 + k * M1] for k in range(1, L_cap + 1)]
    masses = np.array([p.sum() for p in pis])
    tail = _extrapolated_tail(masses, trunc.N)
    if tail > settings.oracle_tail_max:
        raise CapTooSmall(f"extrapolated mass {tail:.3e} beyond L_cap={L_cap} exceeds {settings.oracle_tail_max:.0e}")
    logger.debug(f"Oracle at L_cap={L_cap}: extrapolated tail {tail:.3e}")
    return StationaryHead(L=L_cap, pis=pis, tail_mass=tail, M1=M1)


def choose_oracle_cap(trunc: TruncatedSpec, start: Optional[int] = None) -> Tuple[int, StationaryHead]:
    """Double L_cap from max(64, 4N) until the extrapolated tail is below oracle_tail_target."""
    settings = get_settings()
    L_cap = start if start is not None else max(64, 4 * trunc.N)
    while L_cap <= settings.oracle_max_levels:
        try:
            head = oracle_solve_finite(trunc, L_cap)
            if head.tail_mass <= settings.oracle_tail_target:
                logger.info(f"Oracle cap {L_cap} for N={trunc.N} (tail {head.tail_mass:.3e})")
                return L_cap, head
        except CapTooSmall:
            pass
        L_cap *= 2
    raise CapTooSmall(f"no oracle cap up to {settings.oracle_max_levels} levels reaches {settings.oracle_tail_target:.0e}")


# ---------------------------------------------------------------------------
# Reference and constants
# ---------------------------------------------------------------------------

def default_tail_distribution(spec: MG1Spec) -> Optional[IntegratedTail]:
    """F = H_I for the heaviest power tail of the chain, None with bounded increments."""
    gammas = [
        seq.tail.gamma
        for seq in (spec.Aseq, spec.Bseq)
        if seq.tail is not None and np.any(seq.tail.D > 0)
    ]
    if not gammas:
        return None
    return IntegratedTail(source_gamma=min(gammas))


def reference_solution(
    spec: MG1Spec,
    N_ref: int,
    L_ref: Optional[int] = None,
    ref_tol: Optional[float] = None,
    sweep_max_N: Optional[int] = None,
    F: Optional[IntegratedTail] = None,
    solver: Optional[ChainSolver] = None,
) -> ReferenceSolution:
    """
    pi_ref from the N_ref truncation, checked against the 2 N_ref truncation.

    Raises:
        PreconditionViolation: N_ref < ref_factor * sweep_max_N or L_ref < level_factor * N_ref
        ReferenceUnstable: gap > ref_tol * Fbar(sweep_max_N)
    """
    settings = get_settings()
    if ref_tol is None:
        ref_tol = settings.ref_tol
    if sweep_max_N is None:
        sweep_max_N = max(1, N_ref // settings.ref_factor)
    if L_ref is None:
        L_ref = settings.level_factor * N_ref
    if N_ref < settings.ref_factor * sweep_max_N:
        raise PreconditionViolation(
            f"N_ref={N_ref} must be >= {settings.ref_factor} x largest sweep N ({sweep_max_N})"
        )
    if L_ref < settings.level_factor * N_ref:
        raise PreconditionViolation(f"L_ref={L_ref} must be >= {settings.level_factor} x N_ref")

    drift = drift_report(spec)
    if drift.sigma >= 0:
        raise NonNegativeDrift(f"sigma={drift.sigma:.6g} is not negative")
    if not drift.assumption1_ok:
        raise PreconditionViolation(f"Assumption 1 fails: {drift.flags}")

    if F is None:
        F = default_tail_distribution(spec)
    solver = solver or get_solver()

    ref = solver.solve(spec, N_ref, L_ref)
    check = solver.solve(spec, 2 * N_ref, L_ref)
    gap, slack = tv_error(ref.head, check.head)
    threshold = ref_tol * F.survival(sweep_max_N) if F is not None else EXACT_GAP_TOL
    g_check = check_g_aperiodic(ref.factors)

    logger.info(f"Reference N_ref={N_ref}, L_ref={L_ref}: gap {gap:.3e} (threshold {threshold:.3e})")
    if gap > threshold:
        raise ReferenceUnstable(f"stability gap {gap:.3e} exceeds {threshold:.3e}: increase N_ref")
    if gap > 0.5 * threshold:
        logger.warning(f"Reference gap {gap:.3e} is within a factor 2 of its threshold {threshold:.3e}")

    return ReferenceSolution(
        N_ref=N_ref,
        L_ref=L_ref,
        head=ref.head,
        stability_gap=gap,
        gap_slack=slack,
        gap_threshold=threshold,
        g_check=g_check,
        check_head=check.head,
    )


def constant_terms(pi_ref, c_A, c_B, sigma: float) -> Dict[str, object]:
    """Pieces of (pi(0) c_B + pibar(0) c_A) / (-sigma)"""
    if sigma >= 0:
        raise NonNegativeDrift(f"sigma={sigma:.6g} is not negative")
    head: StationaryHead = getattr(pi_ref, "head", pi_ref)
    c_A = np.atleast_1d(np.asarray(c_A, dtype=np.float64))
    c_B = np.atleast_1d(np.asarray(c_B, dtype=np.float64))
    pi0 = np.asarray(head.pis[0])
    if head.pibar0 is not None:
        pibar0 = np.asarray(head.pibar0)
        slack = 0.0
    else:
        pibar0 = np.array(head.pis[1:]).sum(axis=0)
        slack = head.tail_mass
    return {
        "c_A": c_A.tolist(),
        "c_B": c_B.tolist(),
        "sigma": sigma,
        "pi0_cB": float(pi0 @ c_B),
        "pibar0_cA": float(pibar0 @ c_A),
        "pibar0_slack": slack,
    }


def theoretical_constant(pi_ref, c_A, c_B, sigma: float) -> float:
    """
    (pi(0) c_B + pibar(0) c_A) / (-sigma).

    pi_ref is a ReferenceSolution or a StationaryHead. Zero c_A and c_B
    give 0, which is logged as invalid.
    """
    terms = constant_terms(pi_ref, c_A, c_B, sigma)
    if not np.any(np.asarray(terms["c_A"]) > 0) and not np.any(np.asarray(terms["c_B"]) > 0):
        logger.warning("c_A = c_B = 0: the limiting constant is 0 and not valid")
        return 0.0
    return (terms["pi0_cB"] + terms["pibar0_cA"]) / (-sigma)


# ---------------------------------------------------------------------------
# Sweep
# ---------------------------------------------------------------------------

def _row(
    spec: MG1Spec,
    N: int,
    L: int,
    F: IntegratedTail,
    ref: ReferenceSolution,
    solver: ChainSolver,
    ks: Sequence[int],
) -> ConvergenceRow:
    result = solver.solve(spec, N, L)
    head = result.head
    tv, slack = tv_error(head, ref.head)
    fbar = F.survival(N)
    tail_ref = ref.head.mass_above(N)

    levelwise = {}
    diff_min = {}
    for k in sorted(set(ks) | set(range(6))):
        diff = head.level(k) - ref.head.level(k)
        diff_min[k] = float(diff.min())
        if k in ks:
            levelwise[k] = float(diff.sum()) / fbar

    return ConvergenceRow(
        N=N,
        L=head.L,
        tv=tv,
        tv_slack=slack,
        Fbar=fbar,
        ratio_F=tv / fbar,
        tail_mass_ref=tail_ref,
        ratio_tail=tv / tail_ref if tail_ref > 0 else float("nan"),
        levelwise=levelwise,
        level_diff_min=diff_min,
    )


def _within(value: float, target: float, tol: float) -> str:
    if not np.isfinite(value) or target == 0:
        return FAIL
    return PASS if abs(value - target) <= tol * abs(target) else FAIL


def run_sweep(
    spec: MG1Spec,
    F: IntegratedTail,
    Ns: Sequence[int],
    ref: ReferenceSolution,
    L_rule: Optional[Callable[[int], int]] = None,
    workers: Optional[int] = None,
    solver: Optional[ChainSolver] = None,
    levelwise_ks: Optional[Sequence[int]] = None,
    pibar_Ns: Optional[Sequence[int]] = None,
    verdict_tol: Optional[float] = None,
) -> ConvergenceReport:
    """
    Truncation errors of spec at each N against ref, with verdicts on the limiting ratios.

    Verdict tolerances are calibration values (verdict_tol, default 0.15).
    Chains with bounded increments yield not_applicable verdicts.
    """
    settings = get_settings()
    if workers is None:
        workers = settings.sweep_workers
    if levelwise_ks is None:
        levelwise_ks = settings.levelwise_ks
    if verdict_tol is None:
        verdict_tol = settings.verdict_tol
    solver = solver or get_solver()

    Ns = [int(n) for n in Ns]
    if not Ns or any(n < 1 for n in Ns) or any(b <= a for a, b in zip(Ns, Ns[1:])):
        raise PreconditionViolation(f"Ns must be positive and strictly increasing, got {Ns}")
    if settings.ref_factor * Ns[-1] > ref.N_ref:
        raise PreconditionViolation(f"max N={Ns[-1]} exceeds N_ref/{settings.ref_factor} (N_ref={ref.N_ref})")
    if ref.g_check and not ref.g_check.get("ok", False):
        raise PreconditionViolation(f"G of the reference is not aperiodic: {ref.g_check}")

    drift = drift_report(spec)
    applicable = spec.max_increment is None
    if applicable:
        constants = assumption3_constants(spec, F)
        c_A, c_B = constants.c_A, constants.c_B
    else:
        c_A = np.zeros(spec.M1)
        c_B = np.zeros(spec.M0)
    detail = constant_terms(ref, c_A, c_B, drift.sigma)
    const = theoretical_constant(ref, c_A, c_B, drift.sigma)
    targets = {"ratio_F": L1_FACTOR * const, "ratio_tail": L1_FACTOR, "levelwise": const, "pibar_ratio": const}
    detail["l1_factor"] = L1_FACTOR
    detail["ratio_F_target"] = targets["ratio_F"]

    def task(N: int) -> ConvergenceRow:
        # heads share the reference level range so both sides are differenced level by level
        L = L_rule(N) if L_rule else max(settings.level_factor * N, ref.L_ref)
        return _row(spec, N, L, F, ref, solver, levelwise_ks)

    with ThreadPoolExecutor(max_workers=workers) as executor:
        rows = sorted(executor.map(task, Ns), key=lambda r: r.N)

    if pibar_Ns is None:
        pibar_Ns = (2 * Ns[-1], 4 * Ns[-1])
    # pibar from the 2 N_ref solve: an N_ref truncation distorts its own tail past about N_ref / 2
    tail_head = ref.check_head if ref.check_head is not None else ref.head
    pibar_source = "check_2N_ref" if ref.check_head is not None else "reference"
    pibar_ratios = {int(n): tail_head.mass_above(int(n)) / F.survival(n) for n in pibar_Ns if n <= tail_head.L}

    findings = []
    for row in rows:
        if row.N < 50:
            continue
        for k in range(6):
            if row.level_diff_min[k] < 0:
                findings.append(f"N={row.N}: pi^(N)({k}) - pi_ref({k}) has a negative entry {row.level_diff_min[k]:.3e}")
    for note in findings:
        logger.warning(f"Positivity finding: {note}")

    verdicts: Dict[str, str] = {}
    last = rows[-1]
    if not applicable:
        verdicts["ratio_F"] = NOT_APPLICABLE
        verdicts["ratio_F_trend"] = NOT_APPLICABLE
        verdicts["ratio_tail"] = NOT_APPLICABLE
        for k in levelwise_ks:
            verdicts[f"levelwise_{k}"] = NOT_APPLICABLE
        verdicts["levelwise_positive"] = NOT_APPLICABLE
        for n in pibar_ratios:
            verdicts[f"pibar_ratio_{n}"] = NOT_APPLICABLE
    else:
        verdicts["ratio_F"] = _within(last.ratio_F, targets["ratio_F"], verdict_tol)
        if len(rows) >= 3:
            devs = [abs(r.ratio_F - targets["ratio_F"]) for r in rows[-3:]]
            trend_ok = all(b <= a for a, b in zip(devs, devs[1:]))
            verdicts["ratio_F_trend"] = PASS if trend_ok else FAIL
            if not trend_ok:
                logger.warning(f"|ratio_F - {L1_FACTOR:g} x constant| is not non-increasing over the last three N: {devs}")
        else:
            verdicts["ratio_F_trend"] = NOT_APPLICABLE
        verdicts["ratio_tail"] = _within(last.ratio_tail, targets["ratio_tail"], verdict_tol)
        for k in levelwise_ks:
            target = const * float(ref.head.level(k).sum())
            verdicts[f"levelwise_{k}"] = _within(last.levelwise[k], target, verdict_tol)
        positive = all(last.level_diff_min[k] > 0 for k in levelwise_ks)
        verdicts["levelwise_positive"] = PASS if positive else FAIL
        for n, ratio in pibar_ratios.items():
            verdicts[f"pibar_ratio_{n}"] = _within(ratio, const, verdict_tol)

    report = ConvergenceReport(
        rows=rows,
        theoretical_constant=const,
        constants_detail=detail,
        verdicts=verdicts,
        pibar_ratios=pibar_ratios,
        findings=findings,
        reference={
            "N_ref": ref.N_ref,
            "L_ref": ref.L_ref,
            "stability_gap": ref.stability_gap,
            "gap_slack": ref.gap_slack,
            "gap_threshold": ref.gap_threshold,
            "gap_ratio": ref.stability_gap / ref.gap_threshold if ref.gap_threshold > 0 else 0.0,
        },
        verdict_tol=verdict_tol,
        applicable=applicable,
        targets=targets,
        pibar_source=pibar_source,
    )
    logger.info(f"Sweep over N={Ns}: constant {const:.6g}, verdicts {verdicts}")
    return report


__all__ = [
    "ReferenceSolution",
    "ConvergenceRow",
    "ConvergenceReport",
    "tv_error",
    "oracle_solve_finite",
    "choose_oracle_cap",
    "default_tail_distribution",
    "reference_solution",
    "constant_terms",
    "theoretical_constant",
    "run_sweep",
]
