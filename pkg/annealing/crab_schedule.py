"""Annealing schedules: the linear ramp and its CRAB-dressed variant.

The CRAB schedule is s(t) = s0(t)·f(t) with
f(t) = 1 + sin(πt/T)·Σ_k [A_k sin(ω_k t) + B_k cos(ω'_k t)],
where ω_k = 2πk(1 + r_k)/T. The sine envelope replaces division by
λ(t) = 1/sin(πt/T) and is set to exactly zero at both endpoints, so
s(0) = 0 and s(T) = 1 hold bit for bit.
"""
import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from annealing.exceptions import ScheduleError

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]


def crab_frequencies(r: Sequence[float], T: float) -> np.ndarray:
    """ω_k = 2πk(1 + r_k)/T for k = 1..N_c."""
    r = np.asarray(r, dtype=float)
    k = np.arange(1, r.shape[0] + 1)
    return 2.0 * np.pi * k * (1.0 + r) / T


class CrabParams(BaseModel):
    """Coefficients and random frequency offsets of one CRAB schedule.

    ``r`` detunes the sine modes; ``r_cos`` detunes the cosine modes and falls
    back to ``r`` when absent.
    """

    model_config = ConfigDict(frozen=True)

    T: float = Field(gt=0)
    r: Tuple[float, ...]
    A: Tuple[float, ...]
    B: Tuple[float, ...]
    r_cos: Optional[Tuple[float, ...]] = None
    seed: Optional[int] = None

    @field_validator("r", "r_cos")
    @classmethod
    def _offsets_in_range(cls, value):
        if value is None:
            return value
        for r_k in value:
            if not -0.5 <= r_k <= 0.5:
                raise ValueError(f"Random offset {r_k} outside [-0.5, 0.5]")
        return value

    @field_validator("A", "B")
    @classmethod
    def _finite(cls, value):
        if not np.all(np.isfinite(value)):
            raise ValueError("CRAB coefficients must be finite")
        return value

    @model_validator(mode="after")
    def _consistent_lengths(self):
        n_c = len(self.r)
        if n_c < 1:
            raise ValueError("CRAB needs at least one basis mode (N_c >= 1)")
        lengths = {len(self.A), len(self.B), len(self.r_cos or self.r)}
        if lengths != {n_c}:
            raise ValueError(
                f"r, A, B and r_cos must all have length N_c={n_c}, got "
                f"A={len(self.A)}, B={len(self.B)}, r_cos={len(self.r_cos or self.r)}"
            )
        return self

    @property
    def n_c(self) -> int:
        return len(self.r)

    @property
    def sin_frequencies(self) -> np.ndarray:
        return crab_frequencies(self.r, self.T)

    @property
    def cos_frequencies(self) -> np.ndarray:
        return crab_frequencies(self.r_cos if self.r_cos is not None else self.r, self.T)

    @property
    def coefficients(self) -> np.ndarray:
        """Optimization vector (A_1..A_Nc, B_1..B_Nc)."""
        return np.concatenate([self.A, self.B])

    def with_coefficients(self, x: Sequence[float]) -> "CrabParams":
        x = np.asarray(x, dtype=float)
        if x.shape != (2 * self.n_c,):
            raise ValueError(f"Expected {2 * self.n_c} coefficients, got shape {x.shape}")
        return self.model_copy(update={"A": tuple(x[: self.n_c]), "B": tuple(x[self.n_c:])})

    @classmethod
    def zeros(cls, T: float, r: Sequence[float], r_cos: Optional[Sequence[float]] = None,
              seed: Optional[int] = None) -> "CrabParams":
        n_c = len(r)
        return cls(
            T=T,
            r=tuple(float(v) for v in r),
            A=(0.0,) * n_c,
            B=(0.0,) * n_c,
            r_cos=tuple(float(v) for v in r_cos) if r_cos is not None else None,
            seed=seed,
        )


# Optimized coefficients reported for factoring 21 at T = 0.5.
REFERENCE_21_PARAMS = CrabParams(
    T=0.5,
    r=(0.125, -0.348, 0.013, -0.032),
    A=(-0.116, -1.093, 0.234, -0.209),
    r_cos=(-0.181, 0.417, 0.194, 0.205),
    B=(0.166, 0.333, 0.477, 0.340),
)


@dataclass(frozen=True)
class FrequencySet:
    seed: Optional[int]
    r: Tuple[float, ...]
    omegas: Tuple[float, ...]
    r_cos: Optional[Tuple[float, ...]] = None
    omegas_cos: Optional[Tuple[float, ...]] = None


def sample_frequencies(n_c: int, T: float, seed: Optional[int],
                       independent_cos: bool = False) -> FrequencySet:
    """Draw the random offsets r_k ~ U[-0.5, 0.5] and their frequencies.

    Args:
        n_c: Number of basis modes.
        T: Total evolution time.
        seed: Seed of the generator; the same seed always gives the same draw.
        independent_cos: Also draw a separate offset set for the cosine modes.

    Returns:
        FrequencySet with offsets and frequencies.
    """
    if n_c < 1:
        raise ScheduleError(f"N_c must be >= 1, got {n_c}")
    if not T > 0:
        raise ScheduleError(f"T must be positive, got {T}")
    rng = np.random.default_rng(seed)
    r = rng.uniform(-0.5, 0.5, size=n_c)
    r_cos = rng.uniform(-0.5, 0.5, size=n_c) if independent_cos else None
    return FrequencySet(
        seed=seed,
        r=tuple(float(v) for v in r),
        omegas=tuple(float(w) for w in crab_frequencies(r, T)),
        r_cos=tuple(float(v) for v in r_cos) if r_cos is not None else None,
        omegas_cos=tuple(float(w) for w in crab_frequencies(r_cos, T)) if r_cos is not None else None,
    )


class Schedule(ABC):
    """Interpolation function s(t) on [0, T] with s(0) = 0 and s(T) = 1."""

    T: float

    @abstractmethod
    def values(self, times: np.ndarray) -> np.ndarray:
        """Vectorized s(t); no range check."""

    @abstractmethod
    def derivatives(self, times: np.ndarray) -> np.ndarray:
        """Vectorized ds/dt; no range check."""

    @abstractmethod
    def to_dict(self) -> dict:
        ...

    def _check(self, t: ArrayLike) -> np.ndarray:
        times = np.asarray(t, dtype=float)
        if np.any(times < 0.0) or np.any(times > self.T):
            raise ScheduleError(f"t must lie in [0, {self.T}], got {t}")
        return times

    def __call__(self, t: ArrayLike) -> ArrayLike:
        times = self._check(t)
        out = self.values(np.atleast_1d(times))
        return float(out[0]) if times.ndim == 0 else out

    def derivative(self, t: ArrayLike) -> ArrayLike:
        times = self._check(t)
        out = self.derivatives(np.atleast_1d(times))
        return float(out[0]) if times.ndim == 0 else out


@dataclass(frozen=True)
class LinearSchedule(Schedule):
    """s0(t) = t/T."""

    T: float

    def __post_init__(self):
        if not self.T > 0:
            raise ScheduleError(f"T must be positive, got {self.T}")

    def values(self, times: np.ndarray) -> np.ndarray:
        return times / self.T

    def derivatives(self, times: np.ndarray) -> np.ndarray:
        return np.full_like(times, 1.0 / self.T, dtype=float)

    def to_dict(self) -> dict:
        return {"kind": "linear", "T": self.T}


@dataclass(frozen=True)
class CrabSchedule(Schedule):
    """s(t) = base(t)·f(t) with the chopped random-basis correction f."""

    params: CrabParams
    base: Optional[Schedule] = None

    def __post_init__(self):
        if self.base is None:
            object.__setattr__(self, "base", LinearSchedule(self.params.T))
        elif self.base.T != self.params.T:
            raise ScheduleError(
                f"Base schedule has T={self.base.T}, CRAB parameters have T={self.params.T}"
            )

    @property
    def T(self) -> float:
        return self.params.T

    def _envelope(self, times: np.ndarray) -> np.ndarray:
        env = np.sin(np.pi * times / self.T)
        env[(times <= 0.0) | (times >= self.T)] = 0.0
        return env

    def _series(self, times: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        p = self.params
        ws, wc = p.sin_frequencies, p.cos_frequencies
        A, B = np.asarray(p.A), np.asarray(p.B)
        phase_s = np.outer(times, ws)
        phase_c = np.outer(times, wc)
        series = np.sin(phase_s) @ A + np.cos(phase_c) @ B
        d_series = np.cos(phase_s) @ (A * ws) - np.sin(phase_c) @ (B * wc)
        return series, d_series

    def correction(self, times: np.ndarray) -> np.ndarray:
        """f(t)."""
        series, _ = self._series(times)
        return 1.0 + self._envelope(times) * series

    def values(self, times: np.ndarray) -> np.ndarray:
        times = np.asarray(times, dtype=float)
        return self.base.values(times) * self.correction(times)

    def derivatives(self, times: np.ndarray) -> np.ndarray:
        times = np.asarray(times, dtype=float)
        series, d_series = self._series(times)
        env = self._envelope(times)
        d_env = (np.pi / self.T) * np.cos(np.pi * times / self.T)
        f = 1.0 + env * series
        df = d_env * series + env * d_series
        return self.base.derivatives(times) * f + self.base.values(times) * df

    def to_dict(self) -> dict:
        return {
            "kind": "crab",
            "params": self.params.model_dump(),
            "base": self.base.to_dict(),
        }


def schedule_from_dict(data: dict) -> Schedule:
    kind = data.get("kind")
    if kind == "linear":
        return LinearSchedule(float(data["T"]))
    if kind == "crab":
        base = schedule_from_dict(data["base"]) if data.get("base") else None
        return CrabSchedule(CrabParams.model_validate(data["params"]), base)
    raise ScheduleError(f"Unknown schedule kind '{kind}'")


def eval_schedule(sched: Schedule, t: float) -> float:
    """s(t) with a range check on t."""
    return sched(t)
