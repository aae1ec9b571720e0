import pickle

import numpy as np
import pytest

from annealing.exceptions import CapacityError, DimensionMismatchError, NonHermitianError
from annealing.pauli_algebra import (
    PAULI_MATRICES,
    DenseHermitian,
    PauliString,
    QuantumState,
    QubitOperator,
    basis_label,
    bit_table,
    canonical_phase,
    eig_hermitian,
    eigvals_hermitian,
    expectation,
    fidelity,
    materialize,
    operator_sum,
)


def test_pauli_product_phases():
    phase, result = PauliString("X").multiply(PauliString("Y"))
    assert phase == 1j
    assert result == PauliString("Z")
    phase, result = PauliString("ZX").multiply(PauliString("ZX"))
    assert phase == 1
    assert result.is_identity


def test_bit_table_qubit_zero_is_most_significant():
    table = bit_table(3)
    assert table[1].tolist() == [0, 0, 1]
    assert table[4].tolist() == [1, 0, 0]
    assert basis_label(2, 4) == "0010"


def test_number_operator_is_projector_on_set_bit():
    n1 = QubitOperator.number(2, 0)
    assert n1.diagonal().tolist() == [0.0, 0.0, 1.0, 1.0]
    assert n1 * n1 == n1


def test_anticommuting_square_collapses_to_identity():
    x = QubitOperator.single(1, 0, "X")
    z = QubitOperator.single(1, 0, "Z")
    assert (x + z) ** 2 == QubitOperator.identity(1, 2.0)


def test_non_hermitian_product_rejected():
    x = QubitOperator.single(1, 0, "X")
    y = QubitOperator.single(1, 0, "Y")
    with pytest.raises(NonHermitianError):
        x * y


def test_complex_coefficient_rejected():
    with pytest.raises(NonHermitianError):
        QubitOperator(1, {"Z": 1j})


def test_mismatched_term_length_rejected():
    with pytest.raises(DimensionMismatchError):
        QubitOperator(2, {"Z": 1.0})


def test_materialize_matches_kronecker_product():
    op = QubitOperator(2, {"XZ": 1.5, "II": -0.5})
    expected = 1.5 * np.kron(PAULI_MATRICES["X"], PAULI_MATRICES["Z"]) - 0.5 * np.eye(4)
    assert np.allclose(materialize(op).matrix, expected)


def test_diagonal_fast_path_matches_dense():
    op = QubitOperator(3, {"ZZI": 2.0, "IZZ": -1.0, "ZIZ": 0.5, "III": 3.0})
    assert np.allclose(np.diag(materialize(op).matrix).real, op.diagonal())


def test_capacity_guard():
    with pytest.raises(CapacityError):
        materialize(QubitOperator.single(13, 0, "X"))


def test_operator_sum_of_nothing_is_zero():
    assert operator_sum([], 2) == QubitOperator.zero(2)


def test_operator_survives_pickling():
    op = QubitOperator(2, {"ZZ": 1.0, "XI": -0.25})
    assert pickle.loads(pickle.dumps(op)) == op


def test_dense_hermitian_rejects_non_hermitian():
    with pytest.raises(NonHermitianError):
        DenseHermitian(np.array([[0, 1], [0, 0]], dtype=complex))


def test_states_and_expectations():
    zero = QuantumState.from_bits("0")
    assert expectation(QubitOperator.single(1, 0, "Z"), zero) == pytest.approx(1.0)
    plus = QuantumState.plus_state(2)
    assert expectation(QubitOperator.single(2, 1, "X"), plus) == pytest.approx(1.0)
    mixed = QuantumState.maximally_mixed(2)
    assert expectation(QubitOperator.single(2, 0, "Z"), mixed) == pytest.approx(0.0)


def test_state_validation():
    with pytest.raises(ValueError):
        QuantumState.pure([1.0, 1.0])
    assert QuantumState.pure([1.0, 1.0], normalize=True).is_pure
    with pytest.raises(ValueError):
        QuantumState.mixed(np.eye(2))


def test_fidelity_is_clipped_overlap():
    plus = QuantumState.plus_state(1)
    assert fidelity(plus, QuantumState.from_bits("1")) == pytest.approx(0.5)
    assert fidelity(QuantumState.from_bits("1"), QuantumState.from_bits("1")) == 1.0


def test_eig_hermitian_fixes_phase():
    rng = np.random.default_rng(3)
    a = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    m = a + a.conj().T
    values, vectors = eig_hermitian(m)
    assert np.all(np.diff(values) >= 0)
    assert np.allclose(m @ vectors, vectors * values)
    for col in vectors.T:
        pivot = col[np.argmax(np.abs(col) > 1e-8)]
        assert abs(pivot.imag) < 1e-12 and pivot.real > 0


def test_diagonal_is_built_once_and_read_only():
    op = QubitOperator(3, {"ZZI": 1.5, "IIZ": -2.0, "III": 0.5})
    first = op.diagonal()
    assert op.diagonal() is first
    assert not first.flags.writeable
    with pytest.raises(ValueError):
        first[0] = 0.0
    assert expectation(op, QuantumState.from_bits("000")) == pytest.approx(0.0)


def test_stacked_eigendecomposition_matches_single_calls():
    rng = np.random.default_rng(8)
    a = rng.normal(size=(6, 4, 4)) + 1j * rng.normal(size=(6, 4, 4))
    stack = a + a.conj().transpose(0, 2, 1)
    values, vectors = eig_hermitian(stack)
    assert values.shape == (6, 4) and vectors.shape == (6, 4, 4)
    assert np.allclose(eigvals_hermitian(stack), values, atol=1e-12)
    for k in range(6):
        single_values, single_vectors = eig_hermitian(stack[k])
        assert np.allclose(values[k], single_values, atol=1e-12)
        assert np.allclose(vectors[k], single_vectors, atol=1e-10)


def test_canonical_phase_on_a_stack():
    rng = np.random.default_rng(12)
    q, _ = np.linalg.qr(rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4)))
    phases = np.exp(1j * rng.uniform(0, 2 * np.pi, size=(3, 4)))
    stack = q[None, :, :] * phases[:, None, :]
    fixed = canonical_phase(stack)
    assert np.allclose(fixed[0], fixed[1]) and np.allclose(fixed[1], fixed[2])
    assert np.allclose(fixed[0], canonical_phase(q))


def test_eigensolvers_reject_bad_input():
    with pytest.raises(DimensionMismatchError):
        eig_hermitian(np.zeros((2, 3)))
    with pytest.raises(NonHermitianError):
        eigvals_hermitian(np.array([[0, 1], [0, 0]], dtype=complex))
