"""FastAPI application entry point"""

import asyncio
import logging
import sys
from contextlib import asynccontextmanager

from fastapi import FastAPI, HTTPException, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import FileResponse, JSONResponse

from app import __version__
from app.config import get_settings
from app.errors import MG1Error
from app.models.schemas import (
    DiagnosticsResponse,
    DiagnosticsSchema,
    HeadResponse,
    HealthResponse,
    SolveRequest,
    SweepRequest,
    TailsCheckRequest,
    ValidateResponse,
    ViolationSchema,
    ChainSpecSchema,
)
from app.services.cache import spec_fingerprint
from app.services.model import drift_report, validate_spec
from app.services.pipeline import get_solver
from app.services.report_writer import report_to_dict
from app.services.run_logger import get_run_logger
from app.services.tails import ExponentialTail, PowerTail, class_report, integrated_tail
from app.services.verify import default_tail_distribution, reference_solution, run_sweep

# Configure logging
logging.basicConfig(
    level=get_settings().log_level,
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
    handlers=[logging.StreamHandler(sys.stdout)]
)
logger = logging.getLogger(__name__)


@asynccontextmanager
async def lifespan(app: FastAPI):
    """Application lifespan - startup and shutdown"""
    settings = get_settings()
    logger.info("=" * 60)
    logger.info(f"Starting {settings.app_name} {__version__}")
    solver = get_solver()
    logger.info(f"Solver ready: {solver.get_stats()}")
    logger.info(f"API ready at http://{settings.host}:{settings.port}")
    logger.info("=" * 60)

    yield

    logger.info("Shutting down...")


settings = get_settings()
app = FastAPI(
    title=settings.app_name,
    description="Stationary distributions of M/G/1-type chains under LI truncation",
    version=__version__,
    lifespan=lifespan
)

app.add_middleware(
    CORSMiddleware,
    allow_origins=["*"],
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)


@app.exception_handler(MG1Error)
async def mg1_error_handler(request: Request, exc: MG1Error):
    logger.warning(f"{request.url.path}: {exc.code}: {exc.message}")
    status_code = 422 if exc.exit_code == 2 else 500
    return JSONResponse(status_code=status_code, content={"code": exc.code, "detail": exc.message})


async def _run_blocking(func, *args):
    """CPU-bound work goes to the default executor"""
    loop = asyncio.get_running_loop()
    return await loop.run_in_executor(None, func, *args)


@app.get("/health", response_model=HealthResponse)
async def health_check():
    return HealthResponse(status="healthy", version=__version__, solver=get_solver().get_stats())


def _validate(body: ChainSpecSchema) -> ValidateResponse:
    spec = body.to_spec()
    violations = validate_spec(spec)
    if violations:
        return ValidateResponse(
            valid=False,
            violations=[ViolationSchema(clause=v.clause, message=v.message) for v in violations],
        )
    report = drift_report(spec)
    warnings = []
    if not report.flags.get("irreducible_P_sufficient", True):
        warnings.append("irreducibility of P is not certified by the sufficient condition")
    return ValidateResponse(
        valid=True,
        warnings=warnings,
        sigma=report.sigma,
        varpi=report.varpi.tolist(),
        mbar_A=report.mbar_A.tolist(),
        mbar_B_e=report.mbar_B_e.tolist(),
        flags=report.flags,
        assumption1_ok=report.assumption1_ok,
    )


@app.post("/validate", response_model=ValidateResponse)
async def validate(body: ChainSpecSchema):
    """Check a chain and report its drift (sigma < 0 for positive recurrence)"""
    return await _run_blocking(_validate, body)


def _solve(request: SolveRequest) -> HeadResponse:
    spec = request.spec.to_spec()
    result = get_solver().solve(spec, request.N, request.L)
    head = result.head
    if get_settings().run_log_enabled:
        get_run_logger().log(
            "solve", spec_fingerprint(spec), spec.M0, spec.M1, request.N, head.L,
            tail_mass=head.tail_mass, elapsed_ms=result.elapsed_ms, cached=result.cached,
        )
    return HeadResponse(
        N=request.N,
        L=head.L,
        pis=[p.tolist() for p in head.pis],
        tail_mass=head.tail_mass,
        normalization_detail=head.normalization_detail,
        g_period=result.factors.g_period,
        elapsed_ms=result.elapsed_ms,
        cached=result.cached,
    )


@app.post("/solve", response_model=HeadResponse)
async def solve(request: SolveRequest):
    """
    Stationary head pi(0..L) of the N-truncation.

    **Example:** the birth-death chain with up 0.4 / down 0.6 gives
    pi(k) = (1/3)(2/3)^k.
    """
    return await _run_blocking(_solve, request)


def _tails(request: TailsCheckRequest) -> DiagnosticsResponse:
    F = integrated_tail(PowerTail(request.gamma))
    kwargs = dict(y=request.y, p=request.p, xi=request.xi, cutoff=request.cutoff, xs=request.xs)
    return DiagnosticsResponse(
        integrated_tail=[DiagnosticsSchema(**vars(d)) for d in class_report(F, **kwargs)],
        light_tail_control=[DiagnosticsSchema(**vars(d)) for d in class_report(ExponentialTail(), **kwargs)],
    )


@app.post("/tails-check", response_model=DiagnosticsResponse)
async def tails_check(request: TailsCheckRequest):
    """L, L^2 and S diagnostics of F = H_I, next to the light-tailed control"""
    return await _run_blocking(_tails, request)


def _sweep(request: SweepRequest) -> dict:
    spec = request.spec.to_spec()
    if request.gamma is not None:
        F = integrated_tail(PowerTail(request.gamma))
    else:
        F = default_tail_distribution(spec) or integrated_tail(PowerTail(3.0))
    Ns = sorted(request.Ns)
    ref = reference_solution(spec, request.N_ref, sweep_max_N=Ns[-1], F=F)
    report = run_sweep(spec, F, Ns, ref)
    if get_settings().run_log_enabled:
        get_run_logger().log(
            "sweep", spec_fingerprint(spec), spec.M0, spec.M1, Ns[-1], ref.L_ref, verdicts=report.verdicts,
        )
    return report_to_dict(report)


@app.post("/sweep")
async def sweep(request: SweepRequest):
    """Convergence report: tv / Fbar(N) against the theoretical constant"""
    return await _run_blocking(_sweep, request)


@app.get("/stats")
async def get_stats():
    return get_solver().get_stats()


@app.get("/logs/stats")
async def get_log_stats():
    """Run-log statistics"""
    return get_run_logger().get_stats()


@app.get("/logs/download")
async def download_logs():
    """Download the run log CSV"""
    log_path = get_run_logger().get_log_path()

    if not log_path.exists():
        raise HTTPException(status_code=404, detail="Log file not found")

    return FileResponse(
        path=log_path,
        filename="runs.csv",
        media_type="text/csv"
    )


@app.delete("/logs/clear")
async def clear_logs():
    get_run_logger().clear()
    return {"message": "Logs cleared"}


def main():
    """Run the application"""
    import uvicorn
    settings = get_settings()
    uvicorn.run(
        "app.main:app",
        host=settings.host,
        port=settings.port,
        reload=settings.debug
    )


if __name__ == "__main__":
    main()
