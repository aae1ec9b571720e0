"""Time evolution under H(t) = [1 - s(t)]·H0 + s(t)·Hp.

Closed dynamics propagates piecewise-constant midpoint Hamiltonians with exact
step exponentials. Open dynamics integrates the dephasing master equation
ρ' = -i[H, ρ] + γ Σ_k D[Z_k]ρ with integrating-factor RK4 on the same
piecewise-constant Hamiltonian.
"""
import csv
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, List, Optional, Sequence, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from annealing.crab_schedule import Schedule
from annealing.exceptions import DimensionMismatchError, IntegrationError
from annealing.pauli_algebra import (
    DenseHermitian,
    QuantumState,
    QubitOperator,
    bit_table,
    eig_hermitian,
    eigvals_hermitian,
    materialize,
)

logger = logging.getLogger(__name__)

DEFAULT_STEPS = 1000
# Upper bound on stacked matrix entries held at once.
_CHUNK_ENTRIES = 2 ** 22

OperatorLike = Union[QubitOperator, DenseHermitian, np.ndarray]
# Extra Hermitian term as a function of a time array, returning a (k, d, d) stack.
Drive = Callable[[np.ndarray], np.ndarray]


class EvolutionConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    T: float = Field(gt=0)
    steps: int = Field(default=DEFAULT_STEPS, ge=10)
    gamma: float = Field(default=0.0, ge=0)
    record_trajectory: bool = False
    record_stride: int = Field(default=1, ge=1)


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    states: List[QuantumState]

    def __post_init__(self):
        if len(self.times) != len(self.states):
            raise ValueError("Trajectory needs one state per time")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("Trajectory times must increase")

    @property
    def is_pure(self) -> bool:
        return all(s.is_pure for s in self.states)


@dataclass(frozen=True)
class Evolution:
    state: QuantumState
    trajectory: Optional[Trajectory] = None


def as_matrix(op: OperatorLike) -> np.ndarray:
    if isinstance(op, QubitOperator):
        return materialize(op).matrix
    if isinstance(op, DenseHermitian):
        return op.matrix
    return np.asarray(op, dtype=complex)


def _operands(h0: OperatorLike, hp: OperatorLike, dim: int):
    m0, mp = as_matrix(h0), as_matrix(hp)
    if m0.shape != mp.shape or m0.shape != (dim, dim):
        raise DimensionMismatchError(
            f"H0 {m0.shape}, Hp {mp.shape} and state dimension {dim} disagree"
        )
    return m0, mp


def hamiltonian_stack(m0: np.ndarray, mp: np.ndarray, s_values: np.ndarray) -> np.ndarray:
    s = np.asarray(s_values, dtype=float)[:, None, None]
    return (1.0 - s) * m0 + s * mp


def _record_indices(steps: int, stride: int) -> set:
    marks = set(range(stride, steps + 1, stride))
    marks.add(steps)
    return marks


def evolve_closed(h0: OperatorLike, hp: OperatorLike, sched: Schedule, psi0: QuantumState,
                  cfg: EvolutionConfig, drive: Optional[Drive] = None) -> Evolution:
    """Schrödinger evolution with midpoint step propagators.

    Args:
        h0: Initial Hamiltonian.
        hp: Problem Hamiltonian.
        sched: Interpolation s(t) on [0, cfg.T].
        psi0: Normalized initial state.
        cfg: Time and resolution settings.
        drive: Optional extra term added to H at each step midpoint.

    Returns:
        Evolution with the final state and, if requested, the trajectory.
    """
    if not psi0.is_pure:
        raise ValueError("evolve_closed needs a pure initial state")
    m0, mp = _operands(h0, hp, psi0.dim)
    dim = psi0.dim
    dt = cfg.T / cfg.steps

    psi = np.array(psi0.vector)
    record = _record_indices(cfg.steps, cfg.record_stride) if cfg.record_trajectory else set()
    times, snapshots = [0.0], [psi0]
    chunk = max(1, _CHUNK_ENTRIES // (dim * dim))
    for start in range(0, cfg.steps, chunk):
        stop = min(cfg.steps, start + chunk)
        stack = _step_hamiltonians(m0, mp, sched, cfg, drive, start, stop)
        propagators = step_propagators(stack, dt)
        for k in range(stop - start):
            psi = propagators[k] @ psi
            step = start + k + 1
            if step in record:
                times.append(step * dt if step < cfg.steps else cfg.T)
                snapshots.append(QuantumState(vector=psi / np.linalg.norm(psi)))

    drift = abs(np.linalg.norm(psi) - 1.0)
    if drift > 1e-8:
        raise IntegrationError(
            f"State norm drifted by {drift:.2e}; the Hamiltonian stack is not Hermitian"
        )
    final = QuantumState(vector=psi / np.linalg.norm(psi))
    trajectory = Trajectory(np.array(times), snapshots) if cfg.record_trajectory else None
    return Evolution(final, trajectory)


def step_propagators(stack: np.ndarray, tau: float) -> np.ndarray:
    """exp(-i·H_k·tau) for every matrix H_k of a (k, d, d) Hermitian stack."""
    energies, vectors = eig_hermitian(stack)
    phases = np.exp(-1j * energies * tau)
    return vectors @ (phases[:, :, None] * vectors.conj().transpose(0, 2, 1))


def dephasing_rates(n_qubits: int, gamma: float) -> np.ndarray:
    """Elementwise generator of γ Σ_k D[Z_k]: entry (i, j) is -2γ·hamming(i, j)."""
    bits = bit_table(n_qubits)
    hamming = (bits[:, None, :] != bits[None, :, :]).sum(axis=-1)
    return -2.0 * gamma * hamming


def _step_hamiltonians(m0, mp, sched: Schedule, cfg: EvolutionConfig, drive: Optional[Drive],
                       start: int, stop: int) -> np.ndarray:
    dt = cfg.T / cfg.steps
    midpoints = (np.arange(start, stop) + 0.5) * dt
    stack = hamiltonian_stack(m0, mp, sched.values(midpoints))
    if drive is not None:
        stack = stack + drive(midpoints)
    return stack


def _lawson_rk4_step(rho: np.ndarray, u_half: np.ndarray, rates: np.ndarray, h: float) -> np.ndarray:
    # RK4 on the interaction-picture equation; u_half = exp(-i·H·h/2) carries the unitary part exactly.
    u_dag = u_half.conj().T

    def rotate(x):
        return u_half @ x @ u_dag

    rotated = rotate(rho)
    k1 = rotate(rates * rho)
    a = rotated + 0.5 * h * k1
    ka = rates * a
    b = rotated + 0.5 * h * ka
    kb = rates * b
    c = rotate(rotated) + h * rotate(kb)
    kc = rates * c
    return rotate(rotated + (h / 6.0) * (k1 + 2.0 * ka + 2.0 * kb)) + (h / 6.0) * kc


def evolve_open(h0: OperatorLike, hp: OperatorLike, sched: Schedule, rho0: QuantumState,
                cfg: EvolutionConfig, drive: Optional[Drive] = None) -> Evolution:
    """Dephasing master-equation evolution with integrating-factor RK4.

    H is held at its step-midpoint value, the same piecewise-constant
    Hamiltonian ``evolve_closed`` propagates. Within a step the commutator part
    is applied through the exact half-step propagators and classical RK4
    integrates the dephasing term in that rotating frame, so with γ = 0 the
    result is the closed-evolution projector. ρ is symmetrized after every step.
    """
    m0, mp = _operands(h0, hp, rho0.dim)
    rates = dephasing_rates(rho0.n_qubits, cfg.gamma)
    dt = cfg.T / cfg.steps
    logger.debug("Open evolution: %d steps, dt=%.3e, gamma=%g", cfg.steps, dt, cfg.gamma)

    rho = np.array(rho0.density_matrix(), dtype=complex)
    record = _record_indices(cfg.steps, cfg.record_stride) if cfg.record_trajectory else set()
    times, snapshots = [0.0], [rho0]
    chunk = max(1, _CHUNK_ENTRIES // (rho0.dim * rho0.dim))
    for start in range(0, cfg.steps, chunk):
        stop = min(cfg.steps, start + chunk)
        halves = step_propagators(_step_hamiltonians(m0, mp, sched, cfg, drive, start, stop), 0.5 * dt)
        for k in range(stop - start):
            rho = _lawson_rk4_step(rho, halves[k], rates, dt)
            rho = 0.5 * (rho + rho.conj().T)
            step = start + k + 1
            if step in record:
                times.append(step * dt if step < cfg.steps else cfg.T)
                snapshots.append(QuantumState.mixed(rho / np.trace(rho).real, atol=1e-6))

    drift = abs(np.trace(rho) - 1.0)
    if drift > 1e-6:
        raise IntegrationError(
            f"Density-matrix trace drifted by {drift:.2e}; raise steps above {cfg.steps}"
        )
    min_eig = float(eigvals_hermitian(rho)[0])
    if min_eig < -1e-8:
        logger.warning("Density matrix has eigenvalue %.3e below -1e-8; raise steps", min_eig)
    final = QuantumState.mixed(rho, atol=1e-6)
    trajectory = Trajectory(np.array(times), snapshots) if cfg.record_trajectory else None
    return Evolution(final, trajectory)


def evolve(h0: OperatorLike, hp: OperatorLike, sched: Schedule, initial: QuantumState,
           cfg: EvolutionConfig, drive: Optional[Drive] = None,
           open_system: Optional[bool] = None) -> Evolution:
    """Dispatch to open evolution when ``cfg.gamma > 0`` (or ``open_system`` is set)."""
    use_open = cfg.gamma > 0 if open_system is None else open_system
    if use_open:
        rho0 = initial if not initial.is_pure else QuantumState.mixed(initial.density_matrix())
        return evolve_open(h0, hp, sched, rho0, cfg, drive)
    return evolve_closed(h0, hp, sched, initial, cfg, drive)


def _degenerate_groups(energies: np.ndarray, tol: float) -> List[List[int]]:
    groups = [[0]]
    for k in range(1, len(energies)):
        if energies[k] - energies[groups[-1][0]] <= tol:
            groups[-1].append(k)
        else:
            groups.append([k])
    return groups


def instantaneous_populations(traj: Trajectory, h0: OperatorLike, hp: OperatorLike,
                              sched: Schedule, drive: Optional[Drive] = None,
                              degeneracy_tol: float = 1e-9) -> np.ndarray:
    """Populations P_k(t) = |<φ_k(t)|ψ(t)>|² of the instantaneous eigenstates.

    Degenerate levels are handled as one subspace: the subspace population is
    reported on its lowest level index and the other indices get zero.

    Returns:
        Array of shape (len(traj.times), 2^n).
    """
    if not traj.is_pure:
        raise ValueError("Instantaneous populations need a pure-state trajectory")
    dim = traj.states[0].dim
    m0, mp = _operands(h0, hp, dim)
    times = np.asarray(traj.times)
    stack = hamiltonian_stack(m0, mp, sched.values(times))
    if drive is not None:
        stack = stack + drive(times)
    energies, vectors = eig_hermitian(stack)
    populations = np.zeros((len(times), dim))
    for i, state in enumerate(traj.states):
        amplitudes = vectors[i].conj().T @ state.vector
        probs = np.abs(amplitudes) ** 2
        tol = degeneracy_tol * max(1.0, float(np.max(np.abs(energies[i]))))
        for group in _degenerate_groups(energies[i], tol):
            populations[i, group[0]] = probs[group].sum()
    return populations


def export_trajectory_csv(path: Union[str, Path], traj: Trajectory, sched: Schedule,
                          populations: np.ndarray, target_indices: Sequence[int],
                          k_max: Optional[int] = None) -> Path:
    """Write time, s(t), infidelity, P_0..P_kmax as CSV."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    k_max = populations.shape[1] - 1 if k_max is None else min(k_max, populations.shape[1] - 1)
    s_values = sched.values(np.asarray(traj.times))
    targets = list(target_indices)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["time", "s", "infidelity"] + [f"P_{k}" for k in range(k_max + 1)])
        for t, s, state, pops in zip(traj.times, s_values, traj.states, populations):
            infid = 1.0 - float(state.probabilities()[targets].sum())
            writer.writerow([repr(float(t)), repr(float(s)), repr(infid)]
                            + [repr(float(p)) for p in pops[: k_max + 1]])
    return path
