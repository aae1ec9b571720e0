"""Pydantic models for experiment configuration, results and job tracking."""
from datetime import datetime
from enum import Enum
from typing import Any, Dict, List, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, model_validator

from backend.config import settings

Method = Literal["crab", "linear", "cd"]


class JobState(str, Enum):
    """Background job lifecycle."""
    PENDING = "pending"
    RUNNING = "running"
    COMPLETED = "completed"
    FAILED = "failed"


class ExperimentConfig(BaseModel):
    """Validated parameters of one experiment, echoed into every output file."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    command: Literal["spectrum", "optimize", "sweep", "factor", "verify"]
    instance: Union[int, str]
    weighted: bool = True
    T: Optional[float] = Field(default=None, gt=0)
    T_list: Optional[List[float]] = None
    methods: List[Method] = Field(default_factory=lambda: ["crab"])
    g: float = Field(default_factory=lambda: settings.field_strength, gt=0)
    steps: int = Field(default_factory=lambda: settings.evolution_steps, ge=10)
    n_points: int = Field(default_factory=lambda: settings.spectrum_points, ge=11)
    n_c: int = Field(default_factory=lambda: settings.n_c, ge=1)
    restarts: int = Field(default_factory=lambda: settings.restarts, ge=1)
    max_iterations: int = Field(default_factory=lambda: settings.max_iterations, ge=1)
    gamma: float = Field(default=0.0, ge=0)
    noise_strategy: Literal["optimize", "transfer"] = "optimize"
    cost_kind: Literal["energy", "infidelity"] = "energy"
    independent_cos: bool = False
    seed: Optional[int] = Field(default_factory=lambda: settings.default_seed, ge=0)
    workers: int = Field(default_factory=lambda: settings.workers, ge=1)
    output: Optional[str] = None

    @model_validator(mode="after")
    def _command_parameters(self):
        if self.command in ("optimize", "factor") and self.T is None:
            raise ValueError(f"'{self.command}' needs a total time T")
        if self.T_list is not None:
            if not self.T_list:
                raise ValueError("T_list must not be empty")
            if any(not t > 0 for t in self.T_list):
                raise ValueError(f"All T values must be positive, got {self.T_list}")
        if not self.methods:
            raise ValueError("At least one sweep method is required")
        return self


class SpectrumRequest(ExperimentConfig):
    command: Literal["spectrum"] = "spectrum"


class OptimizeRequest(ExperimentConfig):
    command: Literal["optimize"] = "optimize"


class SweepRequest(ExperimentConfig):
    command: Literal["sweep"] = "sweep"


class FactorRequest(ExperimentConfig):
    command: Literal["factor"] = "factor"


class InstanceSummary(BaseModel):
    omega: int
    label: str
    method: str
    n_qubits: int
    solutions: List[str]


class SpectrumSummary(BaseModel):
    delta_min: float
    s_at_min: float
    t_qsl: float
    ground_degeneracy: int
    n_points: int
    csv_path: Optional[str] = None


class SweepRow(BaseModel):
    method: Method
    T: float
    infidelity_mean: float
    infidelity_std: float
    infidelity_best: float
    restarts: int


class FactorResult(BaseModel):
    omega: int
    a: int
    b: int
    readout: Literal["expectation", "dominant"]
    infidelity: float
    populations: Dict[str, float] = Field(default_factory=dict)

    @property
    def equation(self) -> str:
        return f"{self.omega} = {self.a} × {self.b}"


class RunRecord(BaseModel):
    """Self-describing result document."""

    tool: str = "crabfactor"
    version: str
    timestamp: datetime
    config: ExperimentConfig
    instance: InstanceSummary
    master_seed: Optional[int] = None
    result: Dict[str, Any] = Field(default_factory=dict)
    files: List[str] = Field(default_factory=list)


class JobStartResponse(BaseModel):
    job_id: str
    status: JobState
    message: str


class JobStatusResponse(BaseModel):
    job_id: str
    kind: str
    status: JobState
    progress: str = ""
    error: Optional[str] = None
    created_at: datetime


class ReplayResult(BaseModel):
    """Stored best schedule re-run from an optimize record."""

    T: float
    gamma: float
    steps: int
    recorded_infidelity: Optional[float] = None
    infidelity: float
    energy: float
    readout: Optional[Dict[str, Any]] = None
