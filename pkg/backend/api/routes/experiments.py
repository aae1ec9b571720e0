"""Experiment API routes."""
from fastapi import APIRouter, BackgroundTasks, HTTPException
from starlette.concurrency import run_in_threadpool
from annealing.exceptions import AnnealingError, InstanceError, ReadoutError, ScheduleError
from backend.models import (
    FactorRequest,
    FactorResult,
    JobStartResponse,
    JobState,
    JobStatusResponse,
    OptimizeRequest,
    RunRecord,
    SpectrumRequest,
    SweepRequest,
)
from backend.services.experiment_service import experiment_service
from backend.services.job_service import job_service

router = APIRouter()


def _http_error(e: Exception, action: str) -> HTTPException:
    if isinstance(e, (InstanceError, ScheduleError, ReadoutError)):
        return HTTPException(status_code=400, detail=f"{action} failed: {str(e)}")
    return HTTPException(status_code=500, detail=f"{action} failed: {str(e)}")


@router.post("/spectrum")
async def run_spectrum(request: SpectrumRequest):
    """
    Compute the gap curves, Δ_min and T_QSL of an instance.

    Args:
        request: Spectrum configuration

    Returns:
        Summary plus the gap table
    """
    try:
        summary, curve = await run_in_threadpool(experiment_service.spectrum, request)
        return {
            **summary.model_dump(),
            "s_grid": curve.s_grid.tolist(),
            "gaps": curve.gaps.tolist(),
        }
    except AnnealingError as e:
        raise _http_error(e, "Spectrum")


@router.post("/optimize", response_model=JobStartResponse)
async def start_optimize(request: OptimizeRequest, background_tasks: BackgroundTasks):
    """
    Start a CRAB optimization in the background.

    Args:
        request: Optimization configuration
        background_tasks: FastAPI background tasks

    Returns:
        Job identifier to poll
    """
    try:
        experiment_service.load_instance(request)
    except InstanceError as e:
        raise _http_error(e, "Optimization")
    job = job_service.create("optimize")
    background_tasks.add_task(
        job_service.run, job.job_id, lambda progress: experiment_service.optimize(request, progress)
    )
    return JobStartResponse(job_id=job.job_id, status=JobState.PENDING, message="Optimization started")


@router.post("/sweep", response_model=JobStartResponse)
async def start_sweep(request: SweepRequest, background_tasks: BackgroundTasks):
    """
    Start an infidelity-versus-T sweep in the background.

    Args:
        request: Sweep configuration
        background_tasks: FastAPI background tasks

    Returns:
        Job identifier to poll
    """
    try:
        experiment_service.load_instance(request)
    except InstanceError as e:
        raise _http_error(e, "Sweep")
    job = job_service.create("sweep")
    background_tasks.add_task(
        job_service.run, job.job_id, lambda progress: experiment_service.sweep(request, progress)
    )
    return JobStartResponse(job_id=job.job_id, status=JobState.PENDING, message="Sweep started")


@router.get("/status/{job_id}", response_model=JobStatusResponse)
async def get_status(job_id: str):
    """
    Get the status of a background job.

    Args:
        job_id: Unique job identifier

    Returns:
        JobStatusResponse with current status
    """
    return job_service.get_status(job_id)


@router.post("/factor", response_model=FactorResult)
async def factor(request: FactorRequest):
    """
    Optimize, anneal and read out the factors.

    Args:
        request: Factorization configuration

    Returns:
        FactorResult with a·b = ω
    """
    try:
        return await run_in_threadpool(experiment_service.factor, request)
    except AnnealingError as e:
        raise _http_error(e, "Factorization")


@router.get("/{job_id}", response_model=RunRecord)
async def get_result(job_id: str):
    """
    Get the result document of a completed job.

    Args:
        job_id: Unique job identifier

    Returns:
        RunRecord
    """
    return job_service.get_record(job_id)
