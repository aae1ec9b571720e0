"""Request, result and job models."""
from .schemas import (
    ExperimentConfig,
    FactorRequest,
    FactorResult,
    InstanceSummary,
    JobStartResponse,
    JobState,
    JobStatusResponse,
    OptimizeRequest,
    ReplayResult,
    RunRecord,
    SpectrumRequest,
    SpectrumSummary,
    SweepRequest,
    SweepRow,
)

__all__ = [
    "ExperimentConfig",
    "FactorRequest",
    "FactorResult",
    "InstanceSummary",
    "JobStartResponse",
    "JobState",
    "JobStatusResponse",
    "OptimizeRequest",
    "ReplayResult",
    "RunRecord",
    "SpectrumRequest",
    "SpectrumSummary",
    "SweepRequest",
    "SweepRow",
]
