"""CSV/JSON serialization of convergence reports and stationary heads"""

import csv
import json
import logging
from contextlib import contextmanager
from pathlib import Path
from typing import IO, Iterator, Union

import numpy as np

from app.services.mam import StationaryHead
from app.services.verify import L1_FACTOR, ConvergenceReport

logger = logging.getLogger(__name__)

REPORT_HEADER = ["N", "tv", "tv_slack", "Fbar", "ratio_F", "tail_mass_ref", "ratio_tail", "const_theory"]
HEAD_HEADER = ["k", "i", "pi"]

Target = Union[str, Path, IO[str]]


def fmt(x: float) -> str:
    """17 significant digits"""
    return format(float(x), ".17g")


@contextmanager
def _open(target: Target) -> Iterator[IO[str]]:
    if isinstance(target, (str, Path)):
        with open(target, "w", newline="", encoding="utf-8") as f:
            yield f
    else:
        yield target


def write_report_csv(report: ConvergenceReport, target: Target) -> None:
    """One row per N: N,tv,tv_slack,Fbar,ratio_F,tail_mass_ref,ratio_tail,const_theory"""
    with _open(target) as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(REPORT_HEADER)
        for row in report.rows:
            writer.writerow([
                row.N,
                fmt(row.tv),
                fmt(row.tv_slack),
                fmt(row.Fbar),
                fmt(row.ratio_F),
                fmt(row.tail_mass_ref),
                fmt(row.ratio_tail),
                fmt(report.theoretical_constant),
            ])
    if isinstance(target, (str, Path)):
        logger.info(f"Report CSV written to {target}")


def _jsonable(value):
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    if isinstance(value, (np.floating, float)):
        v = float(value)
        return v if np.isfinite(v) else None
    if isinstance(value, np.integer):
        return int(value)
    return value


def report_to_dict(report: ConvergenceReport) -> dict:
    """Companion document of the CSV: constants, verdicts, per-level and tail ratios."""
    return _jsonable({
        "theoretical_constant": report.theoretical_constant,
        "constants_detail": report.constants_detail,
        "verdicts": report.verdicts,
        "passed": report.passed,
        "applicable": report.applicable,
        "calibration": {
            "verdict_tol": report.verdict_tol,
            "targets": report.targets,
            "l1_factor": L1_FACTOR,
            "reference_gap_ratio": report.reference.get("gap_ratio"),
            "pibar_source": report.pibar_source,
            "note": "finite-N tolerances are calibration values, not error bounds; "
                    "tv is the l1 sum, twice the total-variation distance",
        },
        "reference": report.reference,
        "pibar_ratios": report.pibar_ratios,
        "findings": report.findings,
        "rows": [
            {
                "N": row.N,
                "L": row.L,
                "tv": row.tv,
                "tv_slack": row.tv_slack,
                "Fbar": row.Fbar,
                "ratio_F": row.ratio_F,
                "tail_mass_ref": row.tail_mass_ref,
                "ratio_tail": row.ratio_tail,
                "tv_distance": row.tv_distance,
                "ratio_F_distance": row.ratio_F_distance,
                "ratio_tail_distance": row.ratio_tail_distance,
                "levelwise": row.levelwise,
                "level_diff_min": row.level_diff_min,
            }
            for row in report.rows
        ],
    })


def write_report_json(report: ConvergenceReport, target: Target) -> None:
    with _open(target) as f:
        json.dump(report_to_dict(report), f, indent=2, sort_keys=True)
        f.write("\n")
    if isinstance(target, (str, Path)):
        logger.info(f"Report JSON written to {target}")


def write_head_csv(head: StationaryHead, target: Target) -> None:
    """k,i,pi rows for every computed level and phase"""
    with _open(target) as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(HEAD_HEADER)
        for k, pi in enumerate(head.pis):
            for i, value in enumerate(pi):
                writer.writerow([k, i, fmt(value)])
