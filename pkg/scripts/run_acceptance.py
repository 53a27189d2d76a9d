#!/usr/bin/env python3
"""
Desk-scale acceptance run over the shipped chains.

Usage:
    python scripts/run_acceptance.py              # everything
    python scripts/run_acceptance.py --quick      # skip the N_ref = 3200 sweeps
    python scripts/run_acceptance.py --out reports/
"""

import argparse
import logging
import sys
import time
from pathlib import Path

PROJECT_ROOT = Path(__file__).parent.parent
sys.path.insert(0, str(PROJECT_ROOT))

from app.config import DATA_DIR  # noqa: E402
from app.models.schemas import ChainSpecSchema  # noqa: E402
from app.services.mam import check_g_aperiodic, compute_factors, compute_G, g_residual, ramaswami  # noqa: E402
from app.services.report_writer import write_report_csv, write_report_json  # noqa: E402
from app.services.tails import ExponentialTail, IntegratedTail, class_report  # noqa: E402
from app.services.truncation import li_truncate  # noqa: E402
from app.services.verify import choose_oracle_cap, reference_solution, run_sweep, tv_error  # noqa: E402

logger = logging.getLogger("acceptance")

F3 = IntegratedTail(source_gamma=3.0)
SWEEP_NS = [50, 100, 200, 400]
N_REF = 3200


def load(name: str):
    return ChainSpecSchema.load(DATA_DIR / f"{name}.json").to_spec()


def check(label: str, ok: bool, detail: str = "") -> bool:
    print(f"  [{'PASS' if ok else 'FAIL'}] {label} {detail}")
    return ok


def oracle_checks() -> bool:
    print("Oracle equivalence and solver residuals")
    ok = True
    for name, N, tol in (("s1", 1, 1e-10), ("s2", 5, 1e-10), ("s2", 20, 1e-10), ("two_phase", 10, 1e-9)):
        spec = load(name)
        trunc = li_truncate(spec, N)
        L_cap, oracle = choose_oracle_cap(trunc)
        factors = compute_factors(trunc, compute_G(trunc))
        head = ramaswami(trunc, factors, L_cap)
        tv, slack = tv_error(head, oracle)
        ok &= check(f"{name} N={N}", tv <= tol + slack, f"tv={tv:.3e} slack={slack:.3e} L_cap={L_cap}")
        ok &= check(f"{name} N={N} G residual", g_residual(trunc, factors.G) <= 1e-12)
        ok &= check(f"{name} N={N} aperiodic G", check_g_aperiodic(factors)["ok"])
    return ok


def analytic_check() -> bool:
    print("Birth-death chain")
    trunc = li_truncate(load("s1"), 1)
    head = ramaswami(trunc, compute_factors(trunc, compute_G(trunc)), 30)
    err = max(abs(head.pis[k][0] - (1 / 3) * (2 / 3) ** k) for k in range(31))
    ok = check("pi(k) = (1/3)(2/3)^k", err <= 1e-12, f"max err {err:.2e}")
    literal = head.normalization_detail["literal_pi0_mass"]
    return ok & check("literal normalization differs", abs(literal - 0.5) < 1e-10, f"literal={literal:.6f}")


def tails_checks() -> bool:
    print("Class diagnostics")
    ok = all(d.verdict for d in class_report(F3))
    ok = check("IntegratedTail(3) in L, L^2, S", ok)
    control = not any(d.verdict for d in class_report(ExponentialTail()))
    return ok & check("light-tail control rejected", control)


def sweep_checks(out_dir: Path) -> bool:
    ok = True
    for name in ("s2", "two_phase"):
        print(f"Sweep {name}: Ns={SWEEP_NS}, N_ref={N_REF}")
        spec = load(name)
        t0 = time.perf_counter()
        ref = reference_solution(spec, N_REF, sweep_max_N=SWEEP_NS[-1], F=F3)
        report = run_sweep(spec, F3, SWEEP_NS, ref)
        elapsed = time.perf_counter() - t0
        write_report_csv(report, out_dir / f"{name}_report.csv")
        write_report_json(report, out_dir / f"{name}_report.json")
        for row in report.rows:
            print(f"    N={row.N:<5} tv={row.tv:.6e} ratio_F={row.ratio_F:.4f} ratio_tail={row.ratio_tail:.4f}")
        print(f"    constant={report.theoretical_constant:.6f} ({elapsed:.1f} s)")
        for verdict, value in report.verdicts.items():
            ok &= check(verdict, value != "fail", value)
        for note in report.findings:
            print(f"    finding: {note}")
    return ok


def main():
    parser = argparse.ArgumentParser(description="Acceptance run over the shipped chains")
    parser.add_argument("--quick", action="store_true", help="Skip the reference sweeps")
    parser.add_argument("--out", type=Path, default=PROJECT_ROOT / "reports", help="Report directory")
    args = parser.parse_args()

    logging.basicConfig(level=logging.WARNING, format='%(asctime)s - %(name)s - %(levelname)s - %(message)s')
    args.out.mkdir(parents=True, exist_ok=True)

    ok = oracle_checks()
    ok &= analytic_check()
    ok &= tails_checks()
    if not args.quick:
        ok &= sweep_checks(args.out)

    print("=" * 60)
    print("ALL PASSED" if ok else "FAILURES")
    sys.exit(0 if ok else 1)


if __name__ == "__main__":
    main()
