import numpy as np
import pytest

from annealing.cd_baseline import (
    CDConfig,
    cd_coefficients,
    cd_drive,
    cd_sweep,
    evolve_with_cd,
    z_decompose,
)
from annealing.crab_optimizer import linear_baseline
from annealing.crab_schedule import LinearSchedule
from annealing.dynamics import EvolutionConfig, evolve
from annealing.encoding import BUILTIN_OMEGAS, builtin_instance, initial_hamiltonian
from annealing.exceptions import DecompositionError, ScheduleError
from annealing.pauli_algebra import QuantumState, QubitOperator


def test_2479_decomposition(inst2479):
    dec = z_decompose(inst2479.hamiltonian)
    assert dec.h_z.tolist() == pytest.approx([4.75, -10.5, -5.5, -0.5])
    assert dec.J[(0, 1)] == pytest.approx(-5.5)
    assert dec.J[(2, 3)] == pytest.approx(10.5)
    assert dec.K == pytest.approx({(0, 1, 2): 2.75})
    assert dec.L == {}
    assert dec.constant == pytest.approx(29.25)


@pytest.mark.parametrize("omega", BUILTIN_OMEGAS)
def test_decomposition_rebuilds_hamiltonian(omega):
    hp = builtin_instance(omega).hamiltonian
    rebuilt = z_decompose(hp).to_operator()
    assert np.allclose(rebuilt.diagonal(), hp.diagonal(), rtol=0.0, atol=1e-12)


def test_21_has_three_body_terms(inst21):
    dec = z_decompose(inst21.hamiltonian)
    assert any(abs(c) > 0 for c in dec.K.values())


def test_decomposition_rejects_unsupported_terms():
    with pytest.raises(DecompositionError):
        z_decompose(QubitOperator.single(2, 0, "X"))
    with pytest.raises(DecompositionError):
        z_decompose(QubitOperator(5, {"ZZZZZ": 1.0}))


def _literal_coefficients(dec, g, s, s_dot, scope):
    h_x, h_z = (1.0 - s) * -g, s * dec.h_z
    dh_x, dh_z = s_dot * g, s_dot * dec.h_z
    r = s ** 2 * (dec.h_z ** 2 + dec.coupling_weights(scope)) + (1.0 - s) ** 2 * g ** 2
    return (h_z * dh_x - h_x * dh_z) / (2.0 * s_dot * r)


def test_cancelled_form_matches_literal_form(inst2479):
    dec = z_decompose(inst2479.hamiltonian)
    rng = np.random.default_rng(2)
    for _ in range(100):
        s = float(rng.uniform(0.0, 1.0))
        s_dot = float(rng.uniform(0.1, 20.0)) * rng.choice([-1.0, 1.0])
        for scope in ("local", "global"):
            cancelled = cd_coefficients(dec, 10.0, s, scope=scope)
            literal = _literal_coefficients(dec, 10.0, s, s_dot, scope)
            assert np.allclose(cancelled, literal, rtol=0.0, atol=1e-10)


def test_no_local_field_means_no_correction():
    dec = z_decompose(QubitOperator(2, {"ZZ": 1.0}))
    assert np.all(cd_coefficients(dec, 10.0, np.linspace(0, 1, 5)) == 0.0)


def test_global_scope_raises_the_denominator(inst2479):
    dec = z_decompose(inst2479.hamiltonian)
    local = np.abs(cd_coefficients(dec, 10.0, 0.7, scope="local"))
    wide = np.abs(cd_coefficients(dec, 10.0, 0.7, scope="global"))
    assert np.all(wide <= local + 1e-15)


def test_drive_is_hermitian_and_traceless(inst21):
    drive = cd_drive(z_decompose(inst21.hamiltonian), LinearSchedule(0.5), CDConfig())
    stack = drive(np.linspace(0.01, 0.49, 7))
    assert stack.shape == (7, 8, 8)
    assert np.allclose(stack, stack.conj().transpose(0, 2, 1))
    assert np.allclose(np.trace(stack, axis1=1, axis2=2), 0.0)


def test_single_qubit_field_is_corrected_exactly():
    g, T = 10.0, 0.01
    h0 = initial_hamiltonian(1, g)
    hp = QubitOperator.single(1, 0, "Z", -5.0)
    sched = LinearSchedule(T)
    drive = cd_drive(z_decompose(hp), sched, CDConfig(field_strength=g))
    cfg = EvolutionConfig(T=T, steps=2000)
    plus = QuantumState.plus_state(1)
    corrected = evolve(h0, hp, sched, plus, cfg, drive).state
    bare = evolve(h0, hp, sched, plus, cfg).state
    assert corrected.probabilities()[0] > 1.0 - 1e-4
    assert bare.probabilities()[0] < 0.9


def test_zero_scale_reproduces_plain_annealing(inst21):
    result = evolve_with_cd(inst21, None, 0.5, CDConfig(alpha_scale=0.0))
    plain = linear_baseline(inst21, 0.5)
    assert np.array_equal(result.state.vector, plain.state.vector)
    assert result.infidelity == plain.infidelity


def test_schedule_duration_must_match(inst21):
    with pytest.raises(ScheduleError):
        evolve_with_cd(inst21, LinearSchedule(1.0), 0.5, CDConfig())


def test_noisy_sweep(inst21):
    results = cd_sweep(inst21, [0.05, 0.1], CDConfig(), gamma=0.04, steps=100)
    assert [r.T for r in results] == [0.05, 0.1]
    for r in results:
        assert not r.state.is_pure
        assert 0.0 <= r.infidelity <= 1.0
        assert r.gamma == 0.04


def test_random_z_operators_rebuild_exactly():
    rng = np.random.default_rng(23)
    for _ in range(100):
        n = int(rng.integers(1, 6))
        terms = {}
        for _ in range(int(rng.integers(1, 8))):
            weight = int(rng.integers(0, min(n, 4) + 1))
            sites = rng.choice(n, size=weight, replace=False)
            label = "".join("Z" if q in sites else "I" for q in range(n))
            terms[label] = float(rng.normal(scale=5.0))
        hp = QubitOperator(n, terms)
        rebuilt = z_decompose(hp).to_operator()
        assert np.allclose(rebuilt.diagonal(), hp.diagonal(), rtol=0.0, atol=1e-12)
