"""Services for solving and verifying M/G/1-type chains"""

from app.services.linalg import gth_stationary, graph_analysis, solve_i_minus
from app.services.model import MG1Spec, drift_report, validate_spec
from app.services.truncation import TruncatedSpec, li_truncate
from app.services.mam import MAMFactors, StationaryHead, compute_factors, compute_G, ramaswami
from app.services.cache import HeadCache
from app.services.pipeline import ChainSolver, get_solver

__all__ = [
    "gth_stationary",
    "graph_analysis",
    "solve_i_minus",
    "MG1Spec",
    "drift_report",
    "validate_spec",
    "TruncatedSpec",
    "li_truncate",
    "MAMFactors",
    "StationaryHead",
    "compute_G",
    "compute_factors",
    "ramaswami",
    "HeadCache",
    "ChainSolver",
    "get_solver",
]
