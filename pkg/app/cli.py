"""
Command-line front end.

Usage:
    mg1 validate --spec s1.json
    mg1 solve --spec s1.json --N 1 --L 10
    mg1 sweep --spec s2.json --Ns 50,100,200,400 --Nref 3200 --out report.csv
    mg1 tails-check --gamma 3

Exit codes: 0 success, 1 verdict failure or numerical error, 2 input error.
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional, Sequence

from pydantic import ValidationError

from app.config import get_settings
from app.errors import MG1Error
from app.models.schemas import ChainSpecSchema
from app.services.model import MG1Spec, drift_report, validate_spec
from app.services.pipeline import get_solver
from app.services.report_writer import fmt, write_head_csv, write_report_csv, write_report_json
from app.services.tails import DEFAULT_CUTOFF, ExponentialTail, IntegratedTail, PowerTail, class_report, integrated_tail
from app.services.verify import default_tail_distribution, reference_solution, run_sweep

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_INPUT = 2


def _int_list(text: str) -> List[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


class UsageError(Exception):
    """Command-line usage error raised in place of argparse's exit."""


class _Parser(argparse.ArgumentParser):
    # subparsers inherit this class, so their errors land here too
    def error(self, message: str):
        raise UsageError(f"{self.prog}: {message}")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="mg1",
        description="M/G/1-type chains: stationary distributions under LI truncation and convergence sweeps",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
    mg1 validate --spec app/data/chains/s1.json
    mg1 solve --spec app/data/chains/s1.json --N 1 --L 10
    mg1 sweep --spec app/data/chains/s2.json --Ns 50,100,200,400 --Nref 3200 --out report.csv
    mg1 tails-check --gamma 3
        """
    )
    parser.add_argument("--log-level", type=str, default=None, help="Logging level (default: from settings)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="Check a chain file and print its drift report")
    p.add_argument("--spec", type=Path, required=True, help="Chain-spec JSON file")

    p = sub.add_parser("solve", help="Solve the N-truncation and write pi(0..L) as CSV")
    p.add_argument("--spec", type=Path, required=True, help="Chain-spec JSON file")
    p.add_argument("--N", type=int, required=True, help="Truncation level increment")
    p.add_argument("--L", type=int, default=None, help="Levels to compute (default: 4 N)")
    p.add_argument("--out", type=Path, default=None, help="CSV output path (default: stdout)")

    p = sub.add_parser("sweep", help="Convergence sweep against a reference truncation")
    p.add_argument("--spec", type=Path, required=True, help="Chain-spec JSON file")
    p.add_argument("--Ns", type=_int_list, required=True, help="Comma-separated increasing N values")
    p.add_argument("--Nref", type=int, required=True, help="Reference truncation level (>= 8 x max N)")
    p.add_argument("--out", type=Path, default=None, help="CSV report path; JSON goes next to it")
    p.add_argument("--gamma", type=float, default=None,
                   help="Tail exponent of H for Fbar (default: from the chain, else 3)")
    p.add_argument("--workers", type=int, default=None, help="Parallel sweep points (default: from settings)")

    p = sub.add_parser("tails-check", help="Class diagnostics for F = H_I with Hbar(x) = (x+1)^-gamma")
    p.add_argument("--gamma", type=float, required=True, help="Exponent of H (> 1)")
    p.add_argument("--cutoff", type=int, default=DEFAULT_CUTOFF, help="Convolution cutoff for the S check")

    return parser


def _load_spec(path: Path) -> MG1Spec:
    return ChainSpecSchema.load(path).to_spec()


def _vec(values) -> str:
    return "[" + ", ".join(fmt(v) for v in values) + "]"


def cmd_validate(args) -> int:
    spec = _load_spec(args.spec)
    violations = validate_spec(spec)
    if violations:
        for v in violations:
            print(f"violation {v}")
        print("valid = false")
        return EXIT_INPUT

    report = drift_report(spec)
    print("valid = true")
    print(f"sigma = {fmt(report.sigma)}")
    print(f"varpi = {_vec(report.varpi)}")
    print(f"mbar_A = {_vec(report.mbar_A)}")
    print(f"mbar_B_e = {_vec(report.mbar_B_e)}")
    for name, ok in report.flags.items():
        print(f"flag {name} = {str(ok).lower()}")
    if not report.flags.get("irreducible_P_sufficient", True):
        print("warning: irreducibility of P is checked by a sufficient condition only")
    print(f"assumption1_ok = {str(report.assumption1_ok).lower()}")
    return EXIT_OK if report.assumption1_ok else EXIT_FAIL


def cmd_solve(args) -> int:
    spec = _load_spec(args.spec)
    result = get_solver().solve(spec, args.N, args.L)
    if args.out is None:
        write_head_csv(result.head, sys.stdout)
    else:
        write_head_csv(result.head, args.out)
    logger.info(f"tail_mass = {result.head.tail_mass:.3e}, normalization {result.head.normalization_detail}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    spec = _load_spec(args.spec)
    Ns = args.Ns
    if not Ns:
        raise argparse.ArgumentTypeError("--Ns is empty")
    if args.gamma is not None:
        F = integrated_tail(PowerTail(args.gamma))
    else:
        F = default_tail_distribution(spec) or IntegratedTail(source_gamma=3.0)

    ref = reference_solution(spec, args.Nref, sweep_max_N=max(Ns), F=F)
    report = run_sweep(spec, F, Ns, ref, workers=args.workers)

    if args.out is None:
        write_report_csv(report, sys.stdout)
        json.dump({"verdicts": report.verdicts, "theoretical_constant": report.theoretical_constant},
                  sys.stdout, sort_keys=True)
        sys.stdout.write("\n")
    else:
        write_report_csv(report, args.out)
        write_report_json(report, args.out.with_suffix(".json"))
        for name, verdict in report.verdicts.items():
            print(f"{name}: {verdict}")
    return EXIT_OK if report.passed else EXIT_FAIL


def _print_diagnostics(title: str, diagnostics) -> None:
    print(title)
    for d in diagnostics:
        print(f"  {d.check} ({', '.join(f'{k}={v:g}' for k, v in d.params.items())}) "
              f"target={d.target:g} tol={d.tolerance:g} verdict={str(d.verdict).lower()}")
        for x, r in zip(d.xs, d.ratios):
            print(f"    x={x:<12g} ratio={fmt(r)}")


def cmd_tails_check(args) -> int:
    F = integrated_tail(PowerTail(args.gamma))
    report = class_report(F, cutoff=args.cutoff)
    control = class_report(ExponentialTail(), cutoff=args.cutoff)
    _print_diagnostics(F.name, report)
    _print_diagnostics(f"{ExponentialTail().name} (control)", control)
    # the exponential control must fail every heavy-tail check
    ok = all(d.verdict for d in report) and not any(d.verdict for d in control)
    return EXIT_OK if ok else EXIT_FAIL


COMMANDS = {
    "validate": cmd_validate,
    "solve": cmd_solve,
    "sweep": cmd_sweep,
    "tails-check": cmd_tails_check,
}


def _error(code: str, message: str) -> None:
    first_line = " ".join(str(message).split())
    print(f"ERROR {code}: {first_line}", file=sys.stderr)


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as e:
        _error("INVALID_INPUT", e)
        return EXIT_INPUT

    settings = get_settings()
    logging.basicConfig(
        level=(args.log_level or settings.log_level).upper(),
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        handlers=[logging.StreamHandler(sys.stderr)],
    )

    try:
        return COMMANDS[args.command](args)
    except MG1Error as e:
        _error(e.code, e.message)
        return e.exit_code
    except ValidationError as e:
        _error("INVALID_INPUT", e)
        return EXIT_INPUT
    except (argparse.ArgumentTypeError, json.JSONDecodeError) as e:
        _error("INVALID_INPUT", e)
        return EXIT_INPUT
    except OSError as e:
        _error("IO_ERROR", e)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
