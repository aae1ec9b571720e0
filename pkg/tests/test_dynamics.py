import csv

import numpy as np
import pytest

from annealing.crab_schedule import CrabParams, CrabSchedule, LinearSchedule
from annealing.dynamics import (
    EvolutionConfig,
    dephasing_rates,
    evolve,
    evolve_closed,
    evolve_open,
    export_trajectory_csv,
    instantaneous_populations,
)
from annealing.encoding import builtin_instance, initial_hamiltonian, solution_fidelity
from annealing.exceptions import DimensionMismatchError
from annealing.pauli_algebra import QuantumState, QubitOperator, fidelity


def _run21(inst, T, steps=1000, gamma=0.0, record=False, open_system=None):
    h0 = initial_hamiltonian(inst.n_qubits, 10.0)
    cfg = EvolutionConfig(T=T, steps=steps, gamma=gamma, record_trajectory=record)
    return evolve(h0, inst.hamiltonian, LinearSchedule(T), QuantumState.plus_state(3), cfg,
                  open_system=open_system)


def _random_hermitian(rng, dim):
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return (a + a.conj().T) / 2


def test_eigenstate_of_constant_hamiltonian_is_stationary():
    h = initial_hamiltonian(2, 10.0)
    plus = QuantumState.plus_state(2)
    result = evolve(h, h, LinearSchedule(1.0), plus, EvolutionConfig(T=1.0, steps=50))
    assert fidelity(result.state, plus) == pytest.approx(1.0, abs=1e-12)


def test_rabi_flip_under_transverse_field():
    g = 10.0
    h = initial_hamiltonian(1, g)
    T = np.pi / (2 * g)
    result = evolve(h, h, LinearSchedule(T), QuantumState.from_bits("0"), EvolutionConfig(T=T))
    assert result.state.probabilities()[1] == pytest.approx(1.0, abs=1e-10)


def test_linear_ramp_for_21_leaves_sizeable_infidelity(inst21):
    state = _run21(inst21, T=0.5).state
    assert 1.0 - solution_fidelity(state, inst21) == pytest.approx(0.3, abs=0.1)


def test_closed_evolution_is_unitary():
    rng = np.random.default_rng(7)
    for _ in range(100):
        h0, hp = _random_hermitian(rng, 4), _random_hermitian(rng, 4)
        params = CrabParams(
            T=1.0,
            r=tuple(rng.uniform(-0.5, 0.5, 3)),
            A=tuple(rng.normal(size=3)),
            B=tuple(rng.normal(size=3)),
        )
        sched = CrabSchedule(params)
        cfg = EvolutionConfig(T=1.0, steps=200)
        first = evolve_closed(h0, hp, sched, QuantumState.basis(2, 0), cfg).state
        second = evolve_closed(h0, hp, sched, QuantumState.basis(2, 1), cfg).state
        assert np.linalg.norm(first.vector) == pytest.approx(1.0, abs=1e-10)
        assert abs(np.vdot(first.vector, second.vector)) < 1e-10


def test_dimension_mismatch_rejected():
    h0 = initial_hamiltonian(2, 10.0)
    hp = QubitOperator.single(3, 0, "Z")
    with pytest.raises(DimensionMismatchError):
        evolve(h0, hp, LinearSchedule(1.0), QuantumState.plus_state(2), EvolutionConfig(T=1.0))


def test_closed_evolution_needs_pure_state():
    h = initial_hamiltonian(1, 1.0)
    with pytest.raises(ValueError):
        evolve_closed(h, h, LinearSchedule(1.0), QuantumState.maximally_mixed(1),
                      EvolutionConfig(T=1.0))


def test_open_evolution_without_noise_matches_closed(inst21):
    closed = _run21(inst21, T=0.5).state
    noiseless = _run21(inst21, T=0.5, open_system=True).state
    assert not noiseless.is_pure
    assert solution_fidelity(noiseless, inst21) == pytest.approx(
        solution_fidelity(closed, inst21), abs=1e-10
    )
    assert np.allclose(noiseless.rho, closed.density_matrix(), rtol=0.0, atol=1e-10)


def test_pure_dephasing_decays_coherence():
    gamma, T = 0.04, 1.0
    zero = QubitOperator.zero(1)
    result = evolve_open(zero, zero, LinearSchedule(T), QuantumState.mixed(
        QuantumState.plus_state(1).density_matrix()), EvolutionConfig(T=T, gamma=gamma))
    assert result.state.rho[0, 1].real == pytest.approx(0.5 * np.exp(-2 * gamma * T), abs=1e-8)
    assert result.state.rho[0, 0].real == pytest.approx(0.5, abs=1e-12)


def test_dephasing_rates_follow_hamming_distance():
    rates = dephasing_rates(2, 0.5)
    assert rates[0, 0] == 0.0
    assert rates[0, 1] == -1.0
    assert rates[0, 3] == -2.0


def test_noisy_evolution_loses_purity_and_keeps_trace(inst21):
    result = _run21(inst21, T=0.5, steps=200, gamma=0.04, record=True)
    purities = [float(np.real(np.trace(s.rho @ s.rho))) for s in result.trajectory.states]
    assert np.all(np.diff(purities) <= 1e-9)
    assert purities[-1] < 1.0
    assert abs(np.trace(result.state.rho) - 1.0) < 1e-8


def test_instantaneous_populations(inst21, tmp_path):
    T = 0.5
    result = _run21(inst21, T=T, record=True)
    h0 = initial_hamiltonian(3, 10.0)
    sched = LinearSchedule(T)
    pops = instantaneous_populations(result.trajectory, h0, inst21.hamiltonian, sched)
    assert pops.shape == (1001, 8)
    assert pops[0, 0] == pytest.approx(1.0, abs=1e-10)
    assert np.allclose(pops.sum(axis=1), 1.0, atol=1e-10)
    assert pops[-1, 0] == pytest.approx(solution_fidelity(result.state, inst21), abs=1e-9)

    path = export_trajectory_csv(tmp_path / "trace.csv", result.trajectory, sched, pops,
                                 inst21.solutions, k_max=2)
    with open(path, newline="", encoding="utf-8") as f:
        rows = list(csv.reader(f))
    assert rows[0] == ["time", "s", "infidelity", "P_0", "P_1", "P_2"]
    assert len(rows) == 1002
    assert float(rows[-1][1]) == 1.0


def test_populations_need_pure_trajectory(inst21):
    result = _run21(inst21, T=0.2, steps=20, gamma=0.04, record=True)
    with pytest.raises(ValueError):
        instantaneous_populations(result.trajectory, initial_hamiltonian(3, 10.0),
                                  inst21.hamiltonian, LinearSchedule(0.2))


def _final_fidelity(inst, T, steps):
    h0 = initial_hamiltonian(inst.n_qubits, 10.0)
    cfg = EvolutionConfig(T=T, steps=steps)
    state = evolve(h0, inst.hamiltonian, LinearSchedule(T), QuantumState.plus_state(inst.n_qubits),
                   cfg).state
    return solution_fidelity(state, inst)


@pytest.mark.parametrize("T", [0.5, 2.0])
@pytest.mark.parametrize("omega", [21, 77, 187, 703, 2479])
def test_step_halving_leaves_fidelity_unchanged(omega, T):
    inst = builtin_instance(omega)
    assert abs(_final_fidelity(inst, T, 1000) - _final_fidelity(inst, T, 2000)) < 1e-6


def test_step_halving_for_degenerate_91():
    inst = builtin_instance(91)
    assert abs(_final_fidelity(inst, 2.0, 1000) - _final_fidelity(inst, 2.0, 2000)) < 1e-3

