"""Local counter-diabatic driving as a reference protocol.

The correction term is H_CD(t) = ṡ·Σ_i α_i(s)·Y_i with the single-qubit
coefficients derived from the Z-expansion of the problem Hamiltonian and the
transverse field of H0.
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Literal, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from annealing.crab_schedule import LinearSchedule, Schedule
from annealing.dynamics import DEFAULT_STEPS, EvolutionConfig, evolve
from annealing.encoding import FactorInstance, initial_hamiltonian, solution_fidelity
from annealing.exceptions import DecompositionError, ScheduleError
from annealing.pauli_algebra import (
    PauliString,
    QuantumState,
    QubitOperator,
    expectation,
    materialize,
)

logger = logging.getLogger(__name__)

MAX_Z_WEIGHT = 4


@dataclass(frozen=True)
class ZDecomposition:
    """Hp = const·I + Σ h_i Z_i + Σ J_ij Z_iZ_j + Σ K_ijk Z_iZ_jZ_k + Σ L_ijkl Z_iZ_jZ_kZ_l.

    Coupling keys are ascending qubit index tuples.
    """

    n_qubits: int
    h_z: np.ndarray
    J: Dict[Tuple[int, int], float] = field(default_factory=dict)
    K: Dict[Tuple[int, int, int], float] = field(default_factory=dict)
    L: Dict[Tuple[int, int, int, int], float] = field(default_factory=dict)
    constant: float = 0.0

    def couplings(self) -> List[Tuple[Tuple[int, ...], float]]:
        return list(self.J.items()) + list(self.K.items()) + list(self.L.items())

    def coupling_weights(self, scope: str = "local") -> np.ndarray:
        """Per-qubit 2ΣJ² + 3ΣK² + 4ΣL².

        ``scope="local"`` sums over couplings containing the qubit; ``"global"``
        gives every qubit the sum over all couplings.
        """
        weights = np.zeros(self.n_qubits)
        total = 0.0
        for sites, coeff in self.couplings():
            contribution = len(sites) * coeff ** 2
            total += contribution
            for q in sites:
                weights[q] += contribution
        if scope == "global":
            return np.full(self.n_qubits, total)
        return weights

    def to_operator(self) -> QubitOperator:
        n = self.n_qubits
        terms = {PauliString.identity(n): self.constant}
        for q, coeff in enumerate(self.h_z):
            terms[PauliString.from_sites(n, {q: "Z"})] = float(coeff)
        for sites, coeff in self.couplings():
            terms[PauliString.from_sites(n, {q: "Z" for q in sites})] = coeff
        return QubitOperator(n, terms)


def z_decompose(hp: QubitOperator) -> ZDecomposition:
    """Read the Z-expansion coefficients of a diagonal operator.

    Raises:
        DecompositionError: A term carries X or Y, or has Z-weight above four.
    """
    n = hp.n_qubits
    h_z = np.zeros(n)
    groups: Dict[int, dict] = {2: {}, 3: {}, 4: {}}
    constant = 0.0
    for string, coeff in hp.terms.items():
        if not string.is_diagonal:
            raise DecompositionError(f"Term '{string}' is not a Z-string")
        sites = string.support
        if len(sites) > MAX_Z_WEIGHT:
            raise DecompositionError(
                f"Term '{string}' has Z-weight {len(sites)}; at most {MAX_Z_WEIGHT} is supported"
            )
        if not sites:
            constant = coeff
        elif len(sites) == 1:
            h_z[sites[0]] = coeff
        else:
            groups[len(sites)][sites] = coeff
    return ZDecomposition(n, h_z, groups[2], groups[3], groups[4], constant)


class CDConfig(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    schedule: Optional[Schedule] = None
    epsilon_r: float = Field(default=1e-12, gt=0)
    coupling_scope: Literal["local", "global"] = "local"
    # 0 turns the correction off.
    alpha_scale: float = 1.0
    field_strength: float = Field(default=10.0, gt=0)


def _r_values(dec: ZDecomposition, g: float, s: np.ndarray, scope: str, epsilon_r: float) -> np.ndarray:
    s = np.asarray(s, dtype=float)[..., None]
    local = dec.h_z ** 2 + dec.coupling_weights(scope)
    r = s ** 2 * local + (1.0 - s) ** 2 * g ** 2
    return np.maximum(r, epsilon_r)


def cd_coefficients(dec: ZDecomposition, g: float, s, s_dot=None,
                    scope: str = "local", epsilon_r: float = 1e-12) -> np.ndarray:
    """α_i = -h_x·h_z^(i) / (2 R_i(s)) with the schedule rate cancelled.

    Here h_x = -g is the transverse field per qubit and R_i(s) =
    h_z(s)² + h_x(s)² + 2ΣJ(s)² + 3ΣK(s)² + 4ΣL(s)² is floored at ``epsilon_r``.
    The rate ṡ of the unsimplified expression cancels; ``s_dot`` is ignored.

    Returns:
        Array of shape s.shape + (n_qubits,).
    """
    h_x = -g
    return -h_x * dec.h_z / (2.0 * _r_values(dec, g, s, scope, epsilon_r))


def _y_matrices(n_qubits: int) -> np.ndarray:
    return np.stack([materialize(QubitOperator.single(n_qubits, q, "Y")).matrix for q in range(n_qubits)])


def cd_drive(dec: ZDecomposition, sched: Schedule, cfg: CDConfig):
    """Return the time-dependent H_CD stack builder for the dynamics module."""
    ys = _y_matrices(dec.n_qubits)
    g = cfg.field_strength

    def drive(times: np.ndarray) -> np.ndarray:
        s = sched.values(times)
        s_dot = sched.derivatives(times)
        alphas = cd_coefficients(dec, g, s, scope=cfg.coupling_scope, epsilon_r=cfg.epsilon_r)
        weights = cfg.alpha_scale * s_dot[:, None] * alphas
        return np.einsum("kq,qij->kij", weights, ys)

    return drive


@dataclass(frozen=True)
class CDResult:
    T: float
    state: QuantumState
    infidelity: float
    energy: float
    gamma: float = 0.0


def evolve_with_cd(inst: FactorInstance, sched: Optional[Schedule], T: float, cfg: CDConfig,
                   gamma: float = 0.0, steps: int = DEFAULT_STEPS) -> CDResult:
    """Anneal |+>^n under H(t) + H_CD(t), closed for γ = 0 and dephasing otherwise.

    Args:
        inst: Instance whose zero-energy subspace is the target.
        sched: Interpolation; falls back to ``cfg.schedule`` and then the linear ramp.
        T: Total time.
        cfg: CD settings.
        gamma: Dephasing rate.
        steps: Time steps of the integrator.

    Returns:
        CDResult with the final state and its ground-space infidelity.
    """
    sched = sched or cfg.schedule or LinearSchedule(T)
    if abs(sched.T - T) > 1e-12:
        raise ScheduleError(f"Schedule has T={sched.T}, requested T={T}")
    h0 = materialize(initial_hamiltonian(inst.n_qubits, cfg.field_strength)).matrix
    hp = materialize(inst.hamiltonian).matrix
    drive = None
    if cfg.alpha_scale != 0.0:
        drive = cd_drive(z_decompose(inst.hamiltonian), sched, cfg)
    evo_cfg = EvolutionConfig(T=T, steps=steps, gamma=gamma)
    state = evolve(h0, hp, sched, QuantumState.plus_state(inst.n_qubits), evo_cfg, drive).state
    infid = 1.0 - solution_fidelity(state, inst)
    logger.debug("CD run of %s at T=%g, gamma=%g: infidelity %.3e", inst.label, T, gamma, infid)
    return CDResult(T=T, state=state, infidelity=infid,
                    energy=expectation(inst.hamiltonian, state), gamma=gamma)


def cd_sweep(inst: FactorInstance, T_list: Sequence[float], cfg: CDConfig,
             gamma: float = 0.0, steps: int = DEFAULT_STEPS) -> List[CDResult]:
    return [evolve_with_cd(inst, None, float(T), cfg, gamma, steps) for T in T_list]
