"""Dense linear algebra and Pauli-string operators for small qubit registers.

Qubit 0 is the leftmost tensor factor, so the basis label |q0 q1 ... q(n-1)> reads
as a binary number with qubit 0 as the most significant bit.
"""
import logging
from dataclasses import dataclass, field
from functools import lru_cache, reduce
from numbers import Real
from types import MappingProxyType
from typing import Dict, Iterable, Mapping, Optional, Tuple, Union

import numpy as np
from scipy import linalg

from annealing.exceptions import (
    CapacityError,
    DimensionMismatchError,
    NonHermitianError,
)

logger = logging.getLogger(__name__)

MAX_QUBITS = 12

PAULI_MATRICES: Dict[str, np.ndarray] = {
    "I": np.array([[1, 0], [0, 1]], dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}

# Single-qubit products a·b = phase · c
_PRODUCT_TABLE: Dict[Tuple[str, str], Tuple[complex, str]] = {
    ("I", "I"): (1, "I"), ("I", "X"): (1, "X"), ("I", "Y"): (1, "Y"), ("I", "Z"): (1, "Z"),
    ("X", "I"): (1, "X"), ("X", "X"): (1, "I"), ("X", "Y"): (1j, "Z"), ("X", "Z"): (-1j, "Y"),
    ("Y", "I"): (1, "Y"), ("Y", "X"): (-1j, "Z"), ("Y", "Y"): (1, "I"), ("Y", "Z"): (1j, "X"),
    ("Z", "I"): (1, "Z"), ("Z", "X"): (1j, "Y"), ("Z", "Y"): (-1j, "X"), ("Z", "Z"): (1, "I"),
}


@lru_cache(maxsize=None)
def bit_table(n_qubits: int) -> np.ndarray:
    """Return the (2^n, n) array of basis-state bits, qubit 0 most significant."""
    indices = np.arange(2 ** n_qubits)
    shifts = np.arange(n_qubits - 1, -1, -1)
    table = (indices[:, None] >> shifts[None, :]) & 1
    table.setflags(write=False)
    return table


def basis_label(index: int, n_qubits: int) -> str:
    """Bit-string label of a computational basis index, e.g. 2 -> '0010' for n=4."""
    return format(index, f"0{n_qubits}b")


def _check_capacity(n_qubits: int) -> None:
    if n_qubits > MAX_QUBITS:
        raise CapacityError(
            f"{n_qubits} qubits exceed the dense limit of {MAX_QUBITS} "
            f"(dimension {2 ** n_qubits})"
        )


@dataclass(frozen=True, order=True)
class PauliString:
    """Tensor product of single-qubit Paulis, one label from IXYZ per qubit."""

    axes: str

    def __post_init__(self):
        if not self.axes:
            raise ValueError("PauliString needs at least one qubit")
        bad = set(self.axes) - set(PAULI_MATRICES)
        if bad:
            raise ValueError(f"Unknown Pauli labels {sorted(bad)} in '{self.axes}'")

    @classmethod
    def identity(cls, n_qubits: int) -> "PauliString":
        return cls("I" * n_qubits)

    @classmethod
    def from_sites(cls, n_qubits: int, sites: Mapping[int, str]) -> "PauliString":
        """Build a string acting with ``sites[q]`` on qubit q and identity elsewhere."""
        axes = ["I"] * n_qubits
        for qubit, axis in sites.items():
            if not 0 <= qubit < n_qubits:
                raise ValueError(f"Qubit {qubit} out of range for {n_qubits} qubits")
            axes[qubit] = axis
        return cls("".join(axes))

    @property
    def n_qubits(self) -> int:
        return len(self.axes)

    @property
    def support(self) -> Tuple[int, ...]:
        return tuple(i for i, a in enumerate(self.axes) if a != "I")

    @property
    def weight(self) -> int:
        return len(self.support)

    @property
    def is_identity(self) -> bool:
        return self.weight == 0

    @property
    def is_diagonal(self) -> bool:
        return set(self.axes) <= {"I", "Z"}

    def multiply(self, other: "PauliString") -> Tuple[complex, "PauliString"]:
        """Product self·other as (phase, string)."""
        if other.n_qubits != self.n_qubits:
            raise DimensionMismatchError(
                f"Cannot multiply {self.n_qubits}- and {other.n_qubits}-qubit strings"
            )
        phase: complex = 1
        axes = []
        for a, b in zip(self.axes, other.axes):
            p, c = _PRODUCT_TABLE[(a, b)]
            phase *= p
            axes.append(c)
        return phase, PauliString("".join(axes))

    def matrix(self) -> np.ndarray:
        _check_capacity(self.n_qubits)
        return reduce(np.kron, [PAULI_MATRICES[a] for a in self.axes])

    def diagonal(self) -> np.ndarray:
        """Diagonal of a Z/I string as a real ±1 vector."""
        if not self.is_diagonal:
            raise ValueError(f"'{self.axes}' is not diagonal in the computational basis")
        bits = bit_table(self.n_qubits)
        support = list(self.support)
        if not support:
            return np.ones(2 ** self.n_qubits)
        parity = bits[:, support].sum(axis=1) & 1
        return 1.0 - 2.0 * parity

    def __str__(self) -> str:
        return self.axes


PauliKey = Union[PauliString, str]


class QubitOperator:
    """Real-weighted sum of Pauli strings on a fixed number of qubits.

    Instances are immutable; arithmetic returns new operators. Exact zero
    coefficients are dropped on construction.
    """

    __slots__ = ("_n_qubits", "_terms", "_diagonal")

    def __init__(self, n_qubits: int, terms: Optional[Mapping[PauliKey, float]] = None):
        if n_qubits < 1:
            raise ValueError(f"n_qubits must be positive, got {n_qubits}")
        clean: Dict[PauliString, float] = {}
        for key, coeff in (terms or {}).items():
            string = key if isinstance(key, PauliString) else PauliString(key)
            if string.n_qubits != n_qubits:
                raise DimensionMismatchError(
                    f"Term '{string}' has {string.n_qubits} qubits, operator has {n_qubits}"
                )
            if isinstance(coeff, complex):
                raise NonHermitianError(f"Complex coefficient {coeff} on '{string}'")
            value = float(coeff)
            if not np.isfinite(value):
                raise ValueError(f"Non-finite coefficient {coeff} on '{string}'")
            value += clean.get(string, 0.0)
            if value == 0.0:
                clean.pop(string, None)
            else:
                clean[string] = value
        self._n_qubits = n_qubits
        self._terms = MappingProxyType(dict(sorted(clean.items())))
        self._diagonal: Optional[np.ndarray] = None

    # construction helpers

    @classmethod
    def zero(cls, n_qubits: int) -> "QubitOperator":
        return cls(n_qubits)

    @classmethod
    def identity(cls, n_qubits: int, coeff: float = 1.0) -> "QubitOperator":
        return cls(n_qubits, {PauliString.identity(n_qubits): coeff})

    @classmethod
    def single(cls, n_qubits: int, qubit: int, axis: str, coeff: float = 1.0) -> "QubitOperator":
        return cls(n_qubits, {PauliString.from_sites(n_qubits, {qubit: axis}): coeff})

    @classmethod
    def number(cls, n_qubits: int, qubit: int) -> "QubitOperator":
        """Binary-variable projector (I - Z_q)/2, which is 1 on basis states with bit q set."""
        return cls(n_qubits, {
            PauliString.identity(n_qubits): 0.5,
            PauliString.from_sites(n_qubits, {qubit: "Z"}): -0.5,
        })

    # properties

    @property
    def n_qubits(self) -> int:
        return self._n_qubits

    @property
    def dim(self) -> int:
        return 2 ** self._n_qubits

    @property
    def terms(self) -> Mapping[PauliString, float]:
        return self._terms

    @property
    def is_diagonal(self) -> bool:
        return all(s.is_diagonal for s in self._terms)

    @property
    def constant(self) -> float:
        return self._terms.get(PauliString.identity(self._n_qubits), 0.0)

    def coefficient(self, key: PauliKey) -> float:
        string = key if isinstance(key, PauliString) else PauliString(key)
        return self._terms.get(string, 0.0)

    def norm_bound(self) -> float:
        """Sum of absolute coefficients, an upper bound on the spectral norm."""
        return float(sum(abs(c) for c in self._terms.values()))

    def diagonal(self) -> np.ndarray:
        """Real diagonal of a Z-diagonal operator, length 2^n (computed once, read-only)."""
        if self._diagonal is None:
            if not self.is_diagonal:
                raise ValueError("Operator has X/Y terms; use materialize() instead")
            _check_capacity(self._n_qubits)
            diag = np.zeros(self.dim)
            for string, coeff in self._terms.items():
                diag += coeff * string.diagonal()
            diag.setflags(write=False)
            self._diagonal = diag
        return self._diagonal

    def simplify(self, atol: float = 1e-12) -> "QubitOperator":
        return QubitOperator(
            self._n_qubits, {s: c for s, c in self._terms.items() if abs(c) > atol}
        )

    # arithmetic

    def _coerce(self, other) -> "QubitOperator":
        if isinstance(other, QubitOperator):
            if other.n_qubits != self._n_qubits:
                raise DimensionMismatchError(
                    f"Operators act on {self._n_qubits} and {other.n_qubits} qubits"
                )
            return other
        if isinstance(other, Real):
            return QubitOperator.identity(self._n_qubits, float(other))
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        merged = dict(self._terms)
        for string, coeff in other.terms.items():
            merged[string] = merged.get(string, 0.0) + coeff
        return QubitOperator(self._n_qubits, merged)

    def __radd__(self, other):
        return self.__add__(other)

    def __neg__(self):
        return QubitOperator(self._n_qubits, {s: -c for s, c in self._terms.items()})

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        return (-self).__add__(other)

    def __mul__(self, other):
        if isinstance(other, Real):
            return QubitOperator(
                self._n_qubits, {s: float(other) * c for s, c in self._terms.items()}
            )
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        product: Dict[PauliString, complex] = {}
        for s1, c1 in self._terms.items():
            for s2, c2 in other.terms.items():
                phase, s = s1.multiply(s2)
                product[s] = product.get(s, 0.0) + phase * c1 * c2
        scale = max(1.0, self.norm_bound() * other.norm_bound())
        real_terms = {}
        for s, c in product.items():
            if abs(c.imag) > 1e-12 * scale:
                raise NonHermitianError(
                    f"Product has imaginary coefficient {c} on '{s}'; "
                    "only Hermitian results are representable"
                )
            real_terms[s] = c.real
        return QubitOperator(self._n_qubits, real_terms)

    def __rmul__(self, other):
        if isinstance(other, Real):
            return self.__mul__(other)
        return NotImplemented

    def __pow__(self, exponent: int) -> "QubitOperator":
        if not isinstance(exponent, int) or exponent < 0:
            raise ValueError("Only non-negative integer powers are supported")
        result = QubitOperator.identity(self._n_qubits)
        for _ in range(exponent):
            result = result * self
        return result

    def __eq__(self, other) -> bool:
        if not isinstance(other, QubitOperator):
            return NotImplemented
        return self._n_qubits == other.n_qubits and dict(self._terms) == dict(other.terms)

    def __hash__(self):
        return hash((self._n_qubits, tuple(self._terms.items())))

    def __reduce__(self):
        return QubitOperator, (self._n_qubits, dict(self._terms))

    def __repr__(self) -> str:
        body = " + ".join(f"{c:g}*{s}" for s, c in self._terms.items()) or "0"
        return f"QubitOperator(n_qubits={self._n_qubits}, {body})"


def operator_sum(ops: Iterable[QubitOperator], n_qubits: int) -> QubitOperator:
    """Sum a possibly empty iterable of operators on ``n_qubits``."""
    total = QubitOperator.zero(n_qubits)
    for op in ops:
        total = total + op
    return total


@dataclass(frozen=True)
class DenseHermitian:
    """Materialized Hermitian matrix (read-only)."""

    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise DimensionMismatchError(f"Expected a square matrix, got shape {m.shape}")
        if not np.allclose(m, m.conj().T, rtol=0.0, atol=1e-12):
            raise NonHermitianError("Matrix is not conjugate-symmetric within 1e-12")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_qubits(self) -> int:
        return int(round(np.log2(self.dim)))


@dataclass(frozen=True)
class QuantumState:
    """Pure state vector or density matrix on n qubits.

    Exactly one of ``vector`` and ``rho`` is set. ``atol`` is the normalization
    tolerance used for validation.
    """

    vector: Optional[np.ndarray] = field(default=None, repr=False)
    rho: Optional[np.ndarray] = field(default=None, repr=False)
    atol: float = 1e-10

    def __post_init__(self):
        if (self.vector is None) == (self.rho is None):
            raise ValueError("QuantumState needs exactly one of vector or rho")
        if self.vector is not None:
            v = np.array(self.vector, dtype=complex).reshape(-1)
            _check_power_of_two(v.shape[0])
            norm = np.linalg.norm(v)
            if abs(norm - 1.0) > self.atol:
                raise ValueError(f"State vector norm {norm:.12g} is not 1 within {self.atol}")
            v.setflags(write=False)
            object.__setattr__(self, "vector", v)
        else:
            r = np.array(self.rho, dtype=complex)
            if r.ndim != 2 or r.shape[0] != r.shape[1]:
                raise DimensionMismatchError(f"Density matrix must be square, got {r.shape}")
            _check_power_of_two(r.shape[0])
            trace = np.trace(r)
            if abs(trace - 1.0) > self.atol:
                raise ValueError(f"Density matrix trace {trace:.12g} is not 1 within {self.atol}")
            if not np.allclose(r, r.conj().T, rtol=0.0, atol=self.atol):
                raise NonHermitianError(f"Density matrix is not Hermitian within {self.atol}")
            r.setflags(write=False)
            object.__setattr__(self, "rho", r)

    @classmethod
    def pure(cls, vector, normalize: bool = False) -> "QuantumState":
        v = np.asarray(vector, dtype=complex)
        if normalize:
            v = v / np.linalg.norm(v)
        return cls(vector=v)

    @classmethod
    def mixed(cls, rho, atol: float = 1e-10) -> "QuantumState":
        return cls(rho=rho, atol=atol)

    @classmethod
    def basis(cls, n_qubits: int, index: int) -> "QuantumState":
        v = np.zeros(2 ** n_qubits, dtype=complex)
        v[index] = 1.0
        return cls(vector=v)

    @classmethod
    def from_bits(cls, bits: str) -> "QuantumState":
        """Basis state from a label such as '0010'."""
        return cls.basis(len(bits), int(bits, 2))

    @classmethod
    def plus_state(cls, n_qubits: int) -> "QuantumState":
        """|+>^n, the ground state of -g·ΣX."""
        dim = 2 ** n_qubits
        return cls(vector=np.full(dim, 1.0 / np.sqrt(dim), dtype=complex))

    @classmethod
    def maximally_mixed(cls, n_qubits: int) -> "QuantumState":
        dim = 2 ** n_qubits
        return cls(rho=np.eye(dim, dtype=complex) / dim)

    @property
    def is_pure(self) -> bool:
        return self.vector is not None

    @property
    def dim(self) -> int:
        return self.vector.shape[0] if self.is_pure else self.rho.shape[0]

    @property
    def n_qubits(self) -> int:
        return int(round(np.log2(self.dim)))

    def density_matrix(self) -> np.ndarray:
        if self.is_pure:
            return np.outer(self.vector, self.vector.conj())
        return self.rho

    def probabilities(self) -> np.ndarray:
        """Computational-basis populations."""
        if self.is_pure:
            return np.abs(self.vector) ** 2
        return np.clip(np.real(np.diag(self.rho)), 0.0, None)


def _check_power_of_two(dim: int) -> None:
    if dim < 2 or dim & (dim - 1):
        raise DimensionMismatchError(f"Dimension {dim} is not a power of two >= 2")


def materialize(op: QubitOperator) -> DenseHermitian:
    """Dense matrix Σ coeff·⊗σ of ``op``.

    Args:
        op: Operator on at most ``MAX_QUBITS`` qubits.

    Returns:
        DenseHermitian wrapping the 2^n × 2^n matrix.
    """
    _check_capacity(op.n_qubits)
    if op.is_diagonal:
        return DenseHermitian(np.diag(op.diagonal()).astype(complex))
    m = np.zeros((op.dim, op.dim), dtype=complex)
    for string, coeff in op.terms.items():
        m += coeff * string.matrix()
    return DenseHermitian(m)


def _expectation_scale(op: QubitOperator) -> float:
    return max(1.0, op.norm_bound())


def expectation(op: QubitOperator, state: QuantumState) -> float:
    """Real expectation value <ψ|O|ψ> or Tr(ρO).

    Z-diagonal operators take an O(2^n) path through the diagonal.
    """
    if op.n_qubits != state.n_qubits:
        raise DimensionMismatchError(
            f"Operator acts on {op.n_qubits} qubits, state has {state.n_qubits}"
        )
    if op.is_diagonal:
        diag = op.diagonal()
        if state.is_pure:
            return float(np.dot(diag, np.abs(state.vector) ** 2))
        value = complex(np.dot(diag, np.diag(state.rho)))
    else:
        m = materialize(op).matrix
        if state.is_pure:
            value = complex(np.vdot(state.vector, m @ state.vector))
        else:
            value = complex(np.einsum("ij,ji->", state.rho, m))
    if abs(value.imag) > 1e-10 * _expectation_scale(op):
        raise NonHermitianError(
            f"Expectation value has imaginary part {value.imag:.3e}; "
            "operator or state is corrupted"
        )
    return float(value.real)


def _hermitian_array(m: Union[DenseHermitian, np.ndarray], caller: str) -> np.ndarray:
    matrix = m.matrix if isinstance(m, DenseHermitian) else np.asarray(m, dtype=complex)
    if matrix.ndim < 2 or matrix.shape[-1] != matrix.shape[-2]:
        raise DimensionMismatchError(f"{caller} needs square matrices, got shape {matrix.shape}")
    scale = max(1.0, float(np.max(np.abs(matrix))) if matrix.size else 1.0)
    if not np.allclose(matrix, np.swapaxes(matrix.conj(), -1, -2), rtol=0.0, atol=1e-10 * scale):
        raise NonHermitianError(f"{caller} requires a Hermitian matrix")
    return matrix


def eig_hermitian(m: Union[DenseHermitian, np.ndarray]) -> Tuple[np.ndarray, np.ndarray]:
    """Ascending eigenvalues and orthonormal eigenvectors (columns).

    Each eigenvector is rotated so its first non-negligible component is real
    and positive, which makes the output deterministic for a fixed input.
    A (k, d, d) stack is decomposed matrix by matrix in one call.
    """
    matrix = _hermitian_array(m, "eig_hermitian")
    if matrix.ndim == 2:
        values, vectors = linalg.eigh(matrix)
    else:
        values, vectors = np.linalg.eigh(matrix)
    return values, canonical_phase(vectors)


def eigvals_hermitian(m: Union[DenseHermitian, np.ndarray]) -> np.ndarray:
    """Ascending eigenvalues of a Hermitian matrix or a (k, d, d) stack."""
    matrix = _hermitian_array(m, "eigvals_hermitian")
    if matrix.ndim == 2:
        return linalg.eigvalsh(matrix)
    return np.linalg.eigvalsh(matrix)


def canonical_phase(vectors: np.ndarray) -> np.ndarray:
    """Fix the global phase of each column (first |v_i| > 1e-8 made real-positive).

    Works on a single (d, d) matrix of eigenvectors or on a (k, d, d) stack.
    """
    vectors = np.array(vectors, dtype=complex)
    pivots = np.argmax(np.abs(vectors) > 1e-8, axis=-2)
    pivot_values = np.take_along_axis(vectors, pivots[..., None, :], axis=-2)[..., 0, :]
    phases = pivot_values.conj() / np.abs(pivot_values)
    return vectors * phases[..., None, :]


def fidelity(state: QuantumState, target: Union[QuantumState, np.ndarray]) -> float:
    """Overlap |<target|ψ>|² (pure) or <target|ρ|target> (mixed), clipped to [0, 1]."""
    t = target.vector if isinstance(target, QuantumState) else np.asarray(target, dtype=complex)
    if t is None:
        raise ValueError("Fidelity target must be a pure state")
    if t.shape[0] != state.dim:
        raise DimensionMismatchError(
            f"Target dimension {t.shape[0]} does not match state dimension {state.dim}"
        )
    if state.is_pure:
        value = abs(np.vdot(t, state.vector)) ** 2
    else:
        value = float(np.real(np.vdot(t, state.rho @ t)))
    return float(min(1.0, max(0.0, value)))


def infidelity(state: QuantumState, target: Union[QuantumState, np.ndarray]) -> float:
    return 1.0 - fidelity(state, target)
