"""
Error Mitigation Module
Depolarization purification of expectation values and McWeeny purification of states
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, List, Mapping, Optional, Tuple, Union

import numpy as np

from src.pauli import PauliString, non_identity_paulis
from src.simulator import DensityMatrix, pauli_expectations

logger = logging.getLogger(__name__)

HARD_CAP = 1.1
LENGTH_FLOOR = 0.05
GAP_TOL = 1e-6
PURE_TOL = 1e-6

MEASURED = 'measured'
DERIVED = 'derived'
FORCED_ZERO = 'forced_zero'


class MitigationRefused(ValueError):
    """Raised when the Bloch length is too small for rescaling to be meaningful"""


class McWeenyError(RuntimeError):
    """Raised for a degenerate or non-converging McWeeny iteration; carries the input state"""

    def __init__(self, message: str, state: DensityMatrix):
        super().__init__(message)
        self.state = state


@dataclass
class ExpectationSet:
    """Non-identity Pauli expectations with provenance"""

    n_qubits: int
    values: Dict[PauliString, float] = field(default_factory=dict)
    forced_zero: FrozenSet[PauliString] = frozenset()
    derived: FrozenSet[PauliString] = frozenset()
    rescaled: bool = False

    def __post_init__(self):
        for pauli, value in self.values.items():
            if pauli.is_identity or pauli.phase != 0 or pauli.n_qubits != self.n_qubits:
                raise ValueError(f"Expectation keys must be unsigned non-identity {self.n_qubits}-qubit Paulis, got {pauli}")
            if not self.rescaled and abs(value) > HARD_CAP:
                raise ValueError(f"Expectation {pauli}={value} exceeds the hard cap {HARD_CAP}")
        overlap = self.forced_zero & set(self.values)
        if overlap:
            raise ValueError(f"Paulis both measured and forced to zero: {sorted(p.label for p in overlap)}")

    @classmethod
    def from_measurements(cls, n_qubits: int, values: Mapping[PauliString, float],
                          forced_zero: Iterable[PauliString] = (),
                          derived: Iterable[PauliString] = ()) -> 'ExpectationSet':
        """Clip raw estimates to [-1, 1] and attach provenance"""
        clipped = {p: float(np.clip(v, -1.0, 1.0)) for p, v in values.items()}
        return cls(n_qubits, clipped, frozenset(forced_zero), frozenset(derived))

    @classmethod
    def from_state(cls, rho: DensityMatrix, forced_zero: Iterable[PauliString] = ()) -> 'ExpectationSet':
        """Exact expectations of every non-identity Pauli not listed as forced zero"""
        forced = frozenset(forced_zero)
        values = {p: v for p, v in pauli_expectations(rho).items() if p not in forced}
        return cls(rho.n_qubits, values, forced)

    def value(self, pauli: PauliString) -> complex:
        """
        Expectation of a possibly signed or phased Pauli

        Args:
            pauli: Any Pauli string, including the identity

        Returns:
            phase * <P>; 0 for forced zeros

        Raises:
            KeyError: Pauli neither measured nor forced to zero
        """
        if pauli.is_identity:
            return pauli.coefficient
        key = pauli.unsigned()
        if key in self.forced_zero:
            return 0.0
        if key not in self.values:
            raise KeyError(f"No expectation for {key.label}")
        return pauli.coefficient * self.values[key]

    def provenance(self, pauli: PauliString) -> str:
        key = pauli.unsigned()
        if key in self.forced_zero:
            return FORCED_ZERO
        return DERIVED if key in self.derived else MEASURED

    def is_complete(self) -> bool:
        covered = set(self.values) | self.forced_zero
        return all(p in covered for p in non_identity_paulis(self.n_qubits))

    def as_mapping(self) -> Dict[PauliString, float]:
        """Values with forced zeros made explicit"""
        mapping = {p: 0.0 for p in self.forced_zero}
        mapping.update(self.values)
        return mapping

    def with_values(self, values: Mapping[PauliString, float], rescaled: Optional[bool] = None) -> 'ExpectationSet':
        return ExpectationSet(self.n_qubits, dict(values), self.forced_zero, self.derived,
                              self.rescaled if rescaled is None else rescaled)

    def to_rows(self) -> List[Dict]:
        rows = [{'pauli': p.label, 'value': self.as_mapping()[p], 'provenance': self.provenance(p)}
                for p in self.as_mapping()]
        return sorted(rows, key=lambda r: r['pauli'])


def bloch_length(expectations: ExpectationSet) -> float:
    """
    Generalized Bloch-vector length sqrt(sum E_P^2 / (2^N - 1))

    Args:
        expectations: Complete set (measured or forced-zero for every non-identity Pauli)

    Returns:
        Length L, 1 for pure states
    """
    if not expectations.is_complete():
        raise ValueError("Bloch length needs every non-identity Pauli measured or flagged as forced zero")
    total = sum(v * v for v in expectations.values.values())
    if total == 0:
        raise MitigationRefused("All expectations vanish; the Bloch length is zero")
    return float(np.sqrt(total / (2 ** expectations.n_qubits - 1)))


def rescale(expectations: ExpectationSet, floor: float = LENGTH_FLOOR) -> ExpectationSet:
    """
    Undo global depolarization by dividing every value by the Bloch length

    Args:
        expectations: Complete expectation set
        floor: Minimum acceptable Bloch length

    Returns:
        Rescaled set of Bloch length 1 (values are not clipped)
    """
    length = bloch_length(expectations)
    if length <= floor:
        raise MitigationRefused(f"Bloch length {length:.4f} is below the floor {floor}")
    logger.debug(f"Rescaling by Bloch length {length:.5f}")
    return expectations.with_values({p: v / length for p, v in expectations.values.items()}, rescaled=True)


def mcweeny_step(matrix: np.ndarray) -> np.ndarray:
    squared = matrix @ matrix
    return 3 * squared - 2 * squared @ matrix


def mcweeny(rho: DensityMatrix, tol: float = 1e-10, max_iter: int = 100,
            return_iterations: bool = False) -> Union[DensityMatrix, Tuple[DensityMatrix, int]]:
    """
    Purify a nearly pure state by iterating rho <- 3 rho^2 - 2 rho^3

    Args:
        rho: Valid density matrix with a non-degenerate dominant eigenvalue
        tol: Stop when |Tr(rho^2) - 1| < tol
        max_iter: Iteration budget
        return_iterations: Also return the number of iterations used

    Returns:
        Pure state (and iteration count when requested)
    """
    eigenvalues = np.linalg.eigvalsh((rho.matrix + rho.matrix.conj().T) / 2)
    if len(eigenvalues) > 1 and eigenvalues[-1] - eigenvalues[-2] <= GAP_TOL:
        raise McWeenyError(f"Dominant eigenvalue is degenerate (gap {eigenvalues[-1] - eigenvalues[-2]:.2e})", rho)

    matrix = rho.matrix.copy()
    iterations = 0
    while abs(np.real(np.trace(matrix @ matrix)) - 1) >= tol:
        if iterations >= max_iter:
            raise McWeenyError(f"McWeeny did not converge within {max_iter} iterations", rho)
        matrix = mcweeny_step(matrix)
        matrix = (matrix + matrix.conj().T) / 2
        matrix /= np.real(np.trace(matrix))
        iterations += 1
    logger.debug(f"McWeeny converged after {iterations} iterations")
    result = DensityMatrix(rho.n_qubits, matrix)
    return (result, iterations) if return_iterations else result


def angle_error(rho_expectations: ExpectationSet, sigma_expectations: ExpectationSet,
                floor: float = LENGTH_FLOOR) -> float:
    """
    cos(epsilon): overlap of the normalized Bloch vectors of rho and a pure target

    Args:
        rho_expectations: Expectations of the measured state
        sigma_expectations: Expectations of a pure target state
        floor: Minimum acceptable Bloch length of rho

    Returns:
        cos(epsilon)
    """
    length = bloch_length(rho_expectations)
    if length <= floor:
        raise MitigationRefused(f"Bloch length {length:.4f} is below the floor {floor}")
    sigma_length = bloch_length(sigma_expectations)
    if abs(sigma_length - 1) > PURE_TOL:
        raise ValueError(f"Target is not pure (Bloch length {sigma_length:.8f})")
    overlap = _bloch_overlap(rho_expectations, sigma_expectations)
    return overlap / (length * (2 ** rho_expectations.n_qubits - 1))


def _bloch_overlap(rho_expectations: ExpectationSet, sigma_expectations: ExpectationSet) -> float:
    if rho_expectations.n_qubits != sigma_expectations.n_qubits:
        raise ValueError("Expectation sets have different widths")
    total = 0.0
    for pauli in non_identity_paulis(rho_expectations.n_qubits):
        total += np.real(rho_expectations.value(pauli)) * np.real(sigma_expectations.value(pauli))
    return float(total)


def fidelity_from_expectations(rho_expectations: ExpectationSet, sigma_expectations: ExpectationSet) -> float:
    """Tr(rho sigma) = (1 + sum rho_P sigma_P) / 2^N"""
    overlap = _bloch_overlap(rho_expectations, sigma_expectations)
    return (1 + overlap) / 2 ** rho_expectations.n_qubits


def length_angle_fidelity(length: float, cos_epsilon: float, n_qubits: int) -> float:
    """Fidelity from the length/angle split"""
    floor = 1.0 / 2 ** n_qubits
    return floor + (1 - floor) * length * cos_epsilon
