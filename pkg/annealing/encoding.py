"""Factorization encodings: problem Hamiltonians, instances and readout.

Two encodings are supported. The direct method squares ω − a·b with the free
bits of the odd factors a and b on qubits. The equation-set method squares and
sums a curated list of binary equations left over after classical
multiplication-table preprocessing; those sets live as JSON files in
``annealing/instances``.
"""
import logging
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from functools import cached_property
from pathlib import Path
from typing import Dict, FrozenSet, Iterable, List, Literal, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from annealing.exceptions import (
    AmbiguousReadoutError,
    FactorizationError,
    InstanceError,
)
from annealing.pauli_algebra import (
    MAX_QUBITS,
    QuantumState,
    QubitOperator,
    basis_label,
    bit_table,
    operator_sum,
)

logger = logging.getLogger(__name__)

INSTANCE_DIR = Path(__file__).parent / "instances"
BUILTIN_OMEGAS = (21, 77, 91, 187, 703, 2479)
DIRECT_BUILTINS = (21, 91)

Monomial = FrozenSet[str]
ReconstructionTerm = Tuple[Union[str, int], int]


@dataclass(frozen=True)
class BinaryPolynomial:
    """Multilinear polynomial in binary variables, asserted equal to zero.

    ``terms`` holds (coefficient, variables) pairs; the empty set is the
    constant term. x² = x is applied on construction, so a monomial never
    repeats a variable.
    """

    terms: Tuple[Tuple[float, Monomial], ...]

    @classmethod
    def from_terms(cls, terms: Iterable[Tuple[float, Iterable[str]]]) -> "BinaryPolynomial":
        merged: Dict[Monomial, float] = {}
        for coeff, variables in terms:
            key = frozenset(variables)
            merged[key] = merged.get(key, 0.0) + float(coeff)
        ordered = sorted(
            ((c, m) for m, c in merged.items() if c != 0.0),
            key=lambda cm: (len(cm[1]), sorted(cm[1])),
        )
        return cls(tuple(ordered))

    @property
    def variables(self) -> FrozenSet[str]:
        return frozenset().union(*(m for _, m in self.terms)) if self.terms else frozenset()

    def evaluate(self, assignment: Mapping[str, int]) -> Fraction:
        """Exact value at a 0/1 assignment."""
        total = Fraction(0)
        for coeff, monomial in self.terms:
            if all(assignment[v] for v in monomial):
                total += Fraction(coeff)
        return total

    def to_operator(self, qubit_of: Mapping[str, int], n_qubits: int) -> QubitOperator:
        """Map each variable x to (I - Z_q)/2 on its qubit."""
        op = QubitOperator.zero(n_qubits)
        for coeff, monomial in self.terms:
            term = QubitOperator.identity(n_qubits, coeff)
            for var in sorted(monomial):
                term = term * QubitOperator.number(n_qubits, qubit_of[var])
            op = op + term
        return op

    def to_document(self) -> List[list]:
        return [[coeff, sorted(monomial)] for coeff, monomial in self.terms]


@dataclass(frozen=True)
class EquationSet:
    """Weighted equations whose squared sum forms the problem Hamiltonian."""

    equations: Tuple[BinaryPolynomial, ...]
    weights: Tuple[float, ...]
    variable_order: Tuple[str, ...]

    def __post_init__(self):
        if len(self.equations) != len(self.weights):
            raise InstanceError(
                f"{len(self.equations)} equations but {len(self.weights)} weights"
            )
        for w in self.weights:
            if not w > 0:
                raise InstanceError(f"Equation weights must be strictly positive, got {w}")
        if len(set(self.variable_order)) != len(self.variable_order):
            raise InstanceError(f"Duplicate names in variable_order {self.variable_order}")
        known = set(self.variable_order)
        for i, eq in enumerate(self.equations):
            unknown = eq.variables - known
            if unknown:
                raise InstanceError(
                    f"Equation {i} uses variables {sorted(unknown)} missing from variable_order"
                )

    @property
    def n_qubits(self) -> int:
        return len(self.variable_order)

    def cost(self, assignment: Mapping[str, int]) -> Fraction:
        """Σ w_i·P_i(x)² in exact arithmetic."""
        return sum(
            (Fraction(w) * eq.evaluate(assignment) ** 2 for eq, w in zip(self.equations, self.weights)),
            Fraction(0),
        )


@dataclass(frozen=True)
class FactorInstance:
    """An integer ω together with its qubit encoding and decoding data.

    For the direct method the free bits are a_1..a_{n_a} then b_1..b_{n_b}. For
    the equation-set method ``fixed_bits`` holds the bits eliminated during
    preprocessing and b is recovered as ω / a.
    """

    omega: int
    method: Literal["direct", "equation_set"]
    variable_order: Tuple[str, ...]
    a_reconstruction: Tuple[ReconstructionTerm, ...]
    b_reconstruction: Tuple[ReconstructionTerm, ...] = ()
    n_a: Optional[int] = None
    n_b: Optional[int] = None
    equation_set: Optional[EquationSet] = None
    fixed_bits: Mapping[str, int] = field(default_factory=dict)
    label: str = ""
    builtin: bool = False

    def __post_init__(self):
        if self.n_qubits > MAX_QUBITS:
            raise InstanceError(
                f"Instance {self.omega} needs {self.n_qubits} qubits; the limit is {MAX_QUBITS}"
            )
        if self.method == "equation_set" and self.equation_set is None:
            raise InstanceError("Equation-set instances need an EquationSet")
        if not self.label:
            object.__setattr__(self, "label", str(self.omega))
        for name, value in self.fixed_bits.items():
            if value not in (0, 1):
                raise InstanceError(f"Fixed bit {name} must be 0 or 1, got {value}")

    @property
    def n_qubits(self) -> int:
        return len(self.variable_order)

    @cached_property
    def hamiltonian(self) -> QubitOperator:
        if self.method == "direct":
            return direct_hamiltonian(self.omega)
        return equations_to_hamiltonian(self.equation_set)

    @cached_property
    def energies(self) -> np.ndarray:
        """Diagonal of the problem Hamiltonian."""
        return self.hamiltonian.diagonal()

    @cached_property
    def solutions(self) -> Tuple[int, ...]:
        """Basis indices of the zero-energy assignments."""
        return tuple(int(i) for i in np.flatnonzero(np.abs(self.energies) < 1e-9))

    def assignment(self, index: int) -> Dict[str, int]:
        """Free-variable assignment of a computational basis index."""
        bits = bit_table(self.n_qubits)[index]
        return {name: int(b) for name, b in zip(self.variable_order, bits)}

    def decode(self, free_bits: Mapping[str, int]) -> Tuple[int, int]:
        """Reconstruct (a, b) from free-bit values; equation sets recover b as ω // a."""
        bits = {**dict(self.fixed_bits), **dict(free_bits)}
        a = _reconstruct(self.a_reconstruction, bits)
        if self.method == "direct":
            return a, _reconstruct(self.b_reconstruction, bits)
        if a == 0 or self.omega % a:
            raise FactorizationError(f"a = {a} does not divide {self.omega}")
        return a, self.omega // a


def _reconstruct(terms: Sequence[ReconstructionTerm], bits: Mapping[str, int]) -> int:
    value = 0
    for source, power in terms:
        if isinstance(source, str):
            if source not in bits:
                raise InstanceError(f"Reconstruction uses unknown bit '{source}'")
            value += bits[source] << power
        else:
            value += int(source) << power
    return value


def _bit_length(y: int) -> int:
    return int(y).bit_length()


def bit_lengths(omega: int) -> Tuple[int, int]:
    """Free-bit counts (n_a, n_b) for the direct encoding.

    Args:
        omega: Odd integer >= 9.

    Returns:
        n_a = m(⌊√ω⌋_o) - 1 and n_b = m(⌊ω/3⌋) - 1, m being the bit length.
    """
    if omega < 9 or omega % 2 == 0:
        raise InstanceError(f"omega must be odd and >= 9, got {omega}")
    root = math.isqrt(omega)
    odd_root = root if root % 2 else root - 1
    n_a = _bit_length(odd_root) - 1
    n_b = _bit_length(omega // 3) - 1
    return n_a, n_b


def initial_hamiltonian(n: int, g: float) -> QubitOperator:
    """Transverse field -g·Σ X_i."""
    if n < 1:
        raise ValueError(f"n must be positive, got {n}")
    if not g > 0:
        raise ValueError(f"Field strength g must be positive, got {g}")
    return QubitOperator(n, {("I" * i + "X" + "I" * (n - i - 1)): -g for i in range(n)})


def direct_hamiltonian(omega: int) -> QubitOperator:
    """[ω·I - (I + Σ 2^l â_l)(I + Σ 2^m b̂_m)]², a-bits on the leading qubits."""
    n_a, n_b = bit_lengths(omega)
    n = n_a + n_b
    a_op = QubitOperator.identity(n)
    for l in range(1, n_a + 1):
        a_op = a_op + float(2 ** l) * QubitOperator.number(n, l - 1)
    b_op = QubitOperator.identity(n)
    for m in range(1, n_b + 1):
        b_op = b_op + float(2 ** m) * QubitOperator.number(n, n_a + m - 1)
    residual = QubitOperator.identity(n, float(omega)) - a_op * b_op
    return residual * residual


def equations_to_hamiltonian(eqs: EquationSet) -> QubitOperator:
    """Σ w_i·P_i² with binary variables mapped to (I - Z)/2 projectors."""
    n = eqs.n_qubits
    qubit_of = {name: q for q, name in enumerate(eqs.variable_order)}
    squares = []
    for eq, weight in zip(eqs.equations, eqs.weights):
        if not weight > 0:
            raise InstanceError(f"Non-positive weight {weight}")
        unknown = eq.variables - set(qubit_of)
        if unknown:
            raise InstanceError(f"Unknown variables {sorted(unknown)}")
        p = eq.to_operator(qubit_of, n)
        squares.append(float(weight) * (p * p))
    return operator_sum(squares, n)


class InstanceDocument(BaseModel):
    """JSON instance file format."""

    model_config = ConfigDict(extra="forbid")

    omega: int
    method: Literal["direct", "equation_set"]
    equations: List[List[Tuple[float, List[str]]]] = Field(default_factory=list)
    weights: List[float] = Field(default_factory=list)
    variable_order: List[str] = Field(default_factory=list)
    fixed_bits: Dict[str, int] = Field(default_factory=dict)
    a_reconstruction: List[Tuple[Union[str, int], int]] = Field(default_factory=list)
    b_reconstruction: List[Tuple[Union[str, int], int]] = Field(default_factory=list)
    n_a: Optional[int] = None
    n_b: Optional[int] = None
    label: Optional[str] = None


def direct_instance(omega: int, builtin: bool = False) -> FactorInstance:
    """Direct-method instance for any odd ω >= 9."""
    n_a, n_b = bit_lengths(omega)
    a_names = tuple(f"a{l}" for l in range(1, n_a + 1))
    b_names = tuple(f"b{m}" for m in range(1, n_b + 1))
    return FactorInstance(
        omega=omega,
        method="direct",
        variable_order=a_names + b_names,
        a_reconstruction=((1, 0),) + tuple((name, l) for l, name in enumerate(a_names, 1)),
        b_reconstruction=((1, 0),) + tuple((name, m) for m, name in enumerate(b_names, 1)),
        n_a=n_a,
        n_b=n_b,
        builtin=builtin,
    )


def instance_from_document(doc: InstanceDocument, builtin: bool = False) -> FactorInstance:
    if doc.omega < 9 or doc.omega % 2 == 0:
        raise InstanceError(f"omega must be odd and >= 9, got {doc.omega}")
    if doc.method == "direct":
        inst = direct_instance(doc.omega, builtin=builtin)
        return replace(inst, label=doc.label) if doc.label else inst
    if not doc.a_reconstruction:
        raise InstanceError("Equation-set instances need an a_reconstruction")
    eqs = EquationSet(
        equations=tuple(BinaryPolynomial.from_terms(eq) for eq in doc.equations),
        weights=tuple(doc.weights),
        variable_order=tuple(doc.variable_order),
    )
    return FactorInstance(
        omega=doc.omega,
        method="equation_set",
        variable_order=eqs.variable_order,
        a_reconstruction=tuple((s, p) for s, p in doc.a_reconstruction),
        equation_set=eqs,
        fixed_bits=dict(doc.fixed_bits),
        label=doc.label or str(doc.omega),
        builtin=builtin,
    )


def instance_to_document(inst: FactorInstance) -> InstanceDocument:
    doc = InstanceDocument(
        omega=inst.omega,
        method=inst.method,
        variable_order=list(inst.variable_order),
        fixed_bits=dict(inst.fixed_bits),
        a_reconstruction=[(s, p) for s, p in inst.a_reconstruction],
        b_reconstruction=[(s, p) for s, p in inst.b_reconstruction],
        n_a=inst.n_a,
        n_b=inst.n_b,
        label=inst.label,
    )
    if inst.equation_set is not None:
        doc.equations = [eq.to_document() for eq in inst.equation_set.equations]
        doc.weights = list(inst.equation_set.weights)
    return doc


def parse_instance(text: str) -> FactorInstance:
    """Parse an instance JSON document."""
    try:
        doc = InstanceDocument.model_validate_json(text)
    except ValidationError as e:
        raise InstanceError(f"Malformed instance file: {e}") from e
    return instance_from_document(doc)


def load_instance(path: Union[str, Path]) -> FactorInstance:
    path = Path(path)
    if not path.exists():
        raise InstanceError(f"Instance file not found: {path}")
    return parse_instance(path.read_text(encoding="utf-8"))


def dump_instance(inst: FactorInstance) -> str:
    return instance_to_document(inst).model_dump_json(indent=2, exclude_none=True)


def builtin_instance(omega: int, weighted: bool = True) -> FactorInstance:
    """One of the curated instances 21, 77, 91, 187, 703, 2479.

    ``weighted=False`` replaces the gap-widening equation weights by ones.
    """
    if omega not in BUILTIN_OMEGAS:
        raise InstanceError(
            f"No built-in instance for {omega}; choose one of {BUILTIN_OMEGAS} "
            "or pass an instance file"
        )
    if omega in DIRECT_BUILTINS:
        return direct_instance(omega, builtin=True)
    doc = InstanceDocument.model_validate_json(
        (INSTANCE_DIR / f"{omega}.json").read_text(encoding="utf-8")
    )
    if not weighted:
        doc.weights = [1.0] * len(doc.weights)
        doc.label = f"{omega}-unweighted"
    return instance_from_document(doc, builtin=True)


def resolve_instance(spec: Union[int, str], weighted: bool = True) -> FactorInstance:
    """Resolve a CLI/API instance argument: built-in ω, custom odd ω, or a file path."""
    text = str(spec).strip()
    if text.isdigit():
        omega = int(text)
        if omega in BUILTIN_OMEGAS:
            return builtin_instance(omega, weighted=weighted)
        return direct_instance(omega)
    return load_instance(text)


@dataclass(frozen=True)
class VerificationReport:
    omega: int
    label: str
    n_qubits: int
    min_energy: float
    solutions: Tuple[str, ...]
    factors: Tuple[Tuple[int, int], ...]
    unique: bool

    def to_dict(self) -> dict:
        return {
            "omega": self.omega,
            "label": self.label,
            "n_qubits": self.n_qubits,
            "min_energy": self.min_energy,
            "solutions": list(self.solutions),
            "factors": [list(f) for f in self.factors],
            "unique": self.unique,
        }


def verify_instance(inst: FactorInstance) -> VerificationReport:
    """Brute-force every assignment and check the zero-energy set.

    Raises:
        InstanceError: No zero-energy assignment, a solution whose factors do not
            multiply to ω, or a built-in whose solution is not unique.
    """
    energies = inst.energies
    if not inst.solutions:
        raise InstanceError(
            f"Instance {inst.label} has no zero-energy assignment "
            f"(minimum {energies.min():g}); the equation set is inconsistent or ω is prime"
        )
    factors = []
    for index in inst.solutions:
        exact = brute_force_cost(inst, index)
        if exact != 0:
            raise InstanceError(
                f"Operator energy of {basis_label(index, inst.n_qubits)} is zero "
                f"but the classical cost is {exact}"
            )
        try:
            a, b = inst.decode(inst.assignment(index))
        except FactorizationError as e:
            raise InstanceError(f"Solution {basis_label(index, inst.n_qubits)}: {e}") from e
        if a * b != inst.omega:
            raise InstanceError(
                f"Solution {basis_label(index, inst.n_qubits)} decodes to {a}·{b} != {inst.omega}"
            )
        factors.append((a, b))
    unique = len({tuple(sorted(f)) for f in factors}) == 1
    if inst.builtin and not unique:
        raise InstanceError(f"Built-in instance {inst.label} has several solutions: {factors}")
    return VerificationReport(
        omega=inst.omega,
        label=inst.label,
        n_qubits=inst.n_qubits,
        min_energy=float(energies.min()),
        solutions=tuple(basis_label(i, inst.n_qubits) for i in inst.solutions),
        factors=tuple(factors),
        unique=unique,
    )


def brute_force_cost(inst: FactorInstance, index: int) -> Fraction:
    """Exact classical cost of one assignment, independent of the operator algebra."""
    assignment = inst.assignment(index)
    if inst.method == "direct":
        a = _reconstruct(inst.a_reconstruction, assignment)
        b = _reconstruct(inst.b_reconstruction, assignment)
        return Fraction((inst.omega - a * b) ** 2)
    return inst.equation_set.cost(assignment)


def solution_fidelity(state: QuantumState, inst: FactorInstance) -> float:
    """Population of the zero-energy subspace; equals |<target|ψ>|² for unique solutions."""
    if state.n_qubits != inst.n_qubits:
        raise InstanceError(
            f"State has {state.n_qubits} qubits, instance {inst.label} needs {inst.n_qubits}"
        )
    total = float(state.probabilities()[list(inst.solutions)].sum())
    return min(1.0, max(0.0, total))


def bit_probabilities(state: QuantumState) -> np.ndarray:
    """Expectation of (I - Z_q)/2 for every qubit q."""
    return state.probabilities() @ bit_table(state.n_qubits)


def basis_populations(state: QuantumState) -> Dict[str, float]:
    probs = state.probabilities()
    return {basis_label(i, state.n_qubits): float(p) for i, p in enumerate(probs)}


def _checked_factors(inst: FactorInstance, free_bits: Mapping[str, int]) -> Tuple[int, int]:
    a, b = inst.decode(free_bits)
    if a * b != inst.omega:
        raise FactorizationError(
            f"Readout {a}·{b} = {a * b} != {inst.omega}; final-state fidelity is too low"
        )
    return a, b


def readout(state: QuantumState, inst: FactorInstance, threshold: float = 0.1) -> Tuple[int, int]:
    """Round each bit expectation and reconstruct the factors.

    Args:
        state: Final state on ``inst.n_qubits`` qubits.
        inst: Instance providing variable order and reconstruction data.
        threshold: Expectations within this distance of 1/2 are rejected.

    Returns:
        (a, b) with a·b = ω.
    """
    if state.n_qubits != inst.n_qubits:
        raise InstanceError(
            f"State has {state.n_qubits} qubits, instance {inst.label} needs {inst.n_qubits}"
        )
    probs = bit_probabilities(state)
    free_bits = {}
    for name, p in zip(inst.variable_order, probs):
        if abs(p - 0.5) < threshold:
            raise AmbiguousReadoutError(
                f"Bit {name} has expectation {p:.3f}, within {threshold} of 0.5"
            )
        free_bits[name] = int(round(p))
    return _checked_factors(inst, free_bits)


def dominant_readout(state: QuantumState, inst: FactorInstance) -> Tuple[int, int]:
    """Decode the most populated computational basis state."""
    if state.n_qubits != inst.n_qubits:
        raise InstanceError(
            f"State has {state.n_qubits} qubits, instance {inst.label} needs {inst.n_qubits}"
        )
    index = int(np.argmax(state.probabilities()))
    return _checked_factors(inst, inst.assignment(index))
