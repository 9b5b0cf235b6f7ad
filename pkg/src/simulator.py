"""
Density Matrix Simulator
Noisy circuit execution, shot sampling, expectation estimation and tomography
"""

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional

import numpy as np

from src.circuit import Circuit, EasyCycle, append_measurement_basis, kron_all, measurement_rotation
from src.noise_model import NoiseModel, ReadoutError
from src.pauli import PauliString, basis_matrices, non_identity_paulis, pauli_basis

logger = logging.getLogger(__name__)

STATE_TOL = 1e-10
PSD_TOL = 1e-8


@dataclass(eq=False)
class DensityMatrix:
    """n-qubit density matrix, qubit 0 most significant"""

    n_qubits: int
    matrix: np.ndarray

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=complex)
        dim = 2 ** self.n_qubits
        if self.matrix.shape != (dim, dim):
            raise ValueError(f"Density matrix for {self.n_qubits} qubits must be {dim}x{dim}, got {self.matrix.shape}")

    @classmethod
    def from_bitstring(cls, bitstring: str) -> 'DensityMatrix':
        n = len(bitstring)
        vector = np.zeros(2 ** n, dtype=complex)
        vector[int(bitstring, 2)] = 1.0
        return cls.from_statevector(vector)

    @classmethod
    def zero_state(cls, n_qubits: int) -> 'DensityMatrix':
        return cls.from_bitstring('0' * n_qubits)

    @classmethod
    def from_statevector(cls, vector: np.ndarray) -> 'DensityMatrix':
        vector = np.asarray(vector, dtype=complex)
        vector = vector / np.linalg.norm(vector)
        return cls(int(round(np.log2(vector.size))), np.outer(vector, vector.conj()))

    @classmethod
    def maximally_mixed(cls, n_qubits: int) -> 'DensityMatrix':
        dim = 2 ** n_qubits
        return cls(n_qubits, np.eye(dim, dtype=complex) / dim)

    def validation_errors(self) -> List[str]:
        """Human-readable list of violated state invariants, empty when valid"""
        errors = []
        if np.linalg.norm(self.matrix - self.matrix.conj().T) > STATE_TOL:
            errors.append("not Hermitian")
        if abs(np.trace(self.matrix) - 1.0) > STATE_TOL:
            errors.append(f"trace {np.trace(self.matrix).real:.12f} != 1")
        if np.linalg.eigvalsh(self._hermitian()).min() < -PSD_TOL:
            errors.append("negative eigenvalue")
        return errors

    def is_valid(self) -> bool:
        return not self.validation_errors()

    def _hermitian(self) -> np.ndarray:
        return (self.matrix + self.matrix.conj().T) / 2


@dataclass
class ShotRecord:
    """Bitstring counts from measuring `observable` (or a setting covering it)"""

    observable: PauliString
    counts: Dict[str, int] = field(default_factory=dict)
    n_shots: int = 0

    def __post_init__(self):
        total = sum(self.counts.values())
        if any(c < 0 for c in self.counts.values()):
            raise ValueError("Counts must be non-negative")
        if total != self.n_shots:
            raise ValueError(f"Counts sum to {total}, expected {self.n_shots}")

    def to_rows(self) -> List[Dict]:
        return [{'observable': self.observable.label, 'bitstring': b, 'count': c}
                for b, c in sorted(self.counts.items())]


def _check_width(rho: DensityMatrix, n_qubits: int, what: str):
    if rho.n_qubits != n_qubits:
        raise ValueError(f"{what} acts on {n_qubits} qubits, state has {rho.n_qubits}")


def apply_circuit(rho: DensityMatrix, circuit: Circuit, noise: Optional[NoiseModel] = None) -> DensityMatrix:
    """
    Run a circuit on a density matrix

    Args:
        rho: Input state
        circuit: Alternating easy/hard cycle circuit
        noise: Hard-cycle noise; None runs the ideal circuit

    Returns:
        Output state
    """
    _check_width(rho, circuit.n_qubits, "Circuit")
    dim = 2 ** circuit.n_qubits
    state = rho.matrix
    for cycle in circuit.cycles:
        if isinstance(cycle, EasyCycle) or noise is None:
            u = cycle.matrix()
            state = u @ state @ u.conj().T
        else:
            state = (noise.superoperator(cycle) @ state.reshape(-1)).reshape(dim, dim)
    state = (state + state.conj().T) / 2
    return DensityMatrix(circuit.n_qubits, state)


def expectation(rho: DensityMatrix, pauli: PauliString) -> float:
    """Tr(rho P) for a Hermitian (possibly signed) Pauli"""
    _check_width(rho, pauli.n_qubits, "Pauli")
    value = np.trace(rho.matrix @ pauli.to_matrix())
    if abs(value.imag) > 1e-8 and pauli.is_hermitian:
        logger.warning(f"Expectation of {pauli} has imaginary part {value.imag:.2e}")
    return float(value.real)


def pauli_expectations(rho: DensityMatrix) -> Dict[PauliString, float]:
    """All non-identity Pauli expectations of a state"""
    values = np.real(np.einsum('kab,ba->k', basis_matrices(rho.n_qubits), rho.matrix))
    return {p: float(v) for p, v in zip(pauli_basis(rho.n_qubits), values) if not p.is_identity}


def _bitstrings(n_qubits: int) -> List[str]:
    return [format(i, f'0{n_qubits}b') for i in range(2 ** n_qubits)]


def _sample_z_basis(state: np.ndarray, n_qubits: int, observable: PauliString, n_shots: int,
                    rng: np.random.Generator, readout: Optional[ReadoutError]) -> ShotRecord:
    if n_shots <= 0:
        raise ValueError(f"n_shots must be positive, got {n_shots}")
    probabilities = np.clip(np.real(np.diag(state)), 0.0, None)
    if readout is not None:
        probabilities = readout.apply(probabilities, n_qubits)
    probabilities = probabilities / probabilities.sum()
    draws = rng.multinomial(n_shots, probabilities)
    counts = {b: int(c) for b, c in zip(_bitstrings(n_qubits), draws) if c > 0}
    return ShotRecord(observable, counts, n_shots)


def sample_shots(rho: DensityMatrix, observable: PauliString, n_shots: int, rng: np.random.Generator,
                 readout: Optional[ReadoutError] = None) -> ShotRecord:
    """
    Measure `observable` on rho by rotating into its eigenbasis and sampling

    Args:
        rho: State
        observable: Non-identity Pauli (a measurement setting)
        n_shots: Number of single shots
        rng: Seeded generator
        readout: Optional readout confusion

    Returns:
        ShotRecord labelled with the observable
    """
    if observable.is_identity:
        raise ValueError("Cannot sample the identity observable")
    _check_width(rho, observable.n_qubits, "Observable")
    rotation = kron_all([measurement_rotation(s) for s in observable.symbols])
    rotated = rotation @ rho.matrix @ rotation.conj().T
    return _sample_z_basis(rotated, rho.n_qubits, observable.unsigned(), n_shots, rng, readout)


def is_compatible(target: PauliString, setting: PauliString) -> bool:
    """True when measuring `setting` qubit-wise also measures `target`"""
    return all(t == 'I' or t == s for t, s in zip(target.symbols, setting.symbols))


def estimate_expectation(record: ShotRecord, pauli: Optional[PauliString] = None) -> float:
    """
    Estimate a Pauli expectation from a shot record

    Args:
        record: Counts from the setting in record.observable
        pauli: Target Pauli (defaults to the recorded observable); may be signed and
            may be any Pauli qubit-wise compatible with the setting

    Returns:
        Mean of the +/-1 eigenvalues over shots
    """
    target = pauli if pauli is not None else record.observable
    if not target.is_hermitian:
        raise ValueError(f"Cannot estimate non-Hermitian {target}")
    if not is_compatible(target, record.observable):
        raise ValueError(f"{target} is not measured by setting {record.observable}")
    support = target.support
    total = 0
    for bitstring, count in record.counts.items():
        parity = sum(int(bitstring[q]) for q in support) % 2
        total += count * (-1 if parity else 1)
    sign = -1.0 if target.phase == 2 else 1.0
    return sign * total / record.n_shots


def tomography(expectations: Mapping[PauliString, float], n_qubits: Optional[int] = None,
               allow_missing: bool = False) -> DensityMatrix:
    """
    Linear-inversion tomography with projection onto the PSD cone

    Args:
        expectations: Non-identity Pauli expectations
        n_qubits: Register width (inferred from keys when omitted)
        allow_missing: Treat absent Paulis as zero (symmetry-forced zeros)

    Returns:
        Reconstructed state
    """
    if n_qubits is None:
        if not expectations:
            raise ValueError("Cannot infer width from empty expectations")
        n_qubits = next(iter(expectations)).n_qubits
    dim = 2 ** n_qubits
    matrix = np.eye(dim, dtype=complex)
    missing = []
    for pauli in non_identity_paulis(n_qubits):
        if pauli in expectations:
            matrix += expectations[pauli] * pauli.to_matrix()
        else:
            missing.append(pauli.label)
    if missing and not allow_missing:
        raise ValueError(f"Missing expectations for {len(missing)} Paulis, e.g. {missing[:3]}")
    matrix /= dim
    eigenvalues, vectors = np.linalg.eigh(matrix)
    if eigenvalues.min() < -PSD_TOL:
        logger.debug(f"PSD projection triggered (min eigenvalue {eigenvalues.min():.3e})")
        clipped = np.clip(eigenvalues, 0.0, None)
        clipped /= clipped.sum()
        matrix = (vectors * clipped) @ vectors.conj().T
    return DensityMatrix(n_qubits, matrix)


def purity(rho: DensityMatrix) -> float:
    return float(np.real(np.trace(rho.matrix @ rho.matrix)))


def fidelity(rho: DensityMatrix, sigma: DensityMatrix) -> float:
    """Tr(rho sigma) against a pure target"""
    _check_width(rho, sigma.n_qubits, "Target state")
    if purity(sigma) < 1 - 1e-8:
        raise ValueError(f"Fidelity target must be pure (purity {purity(sigma):.10f})")
    return float(np.real(np.trace(rho.matrix @ sigma.matrix)))


def write_shot_records(records: Iterable[ShotRecord], path: Path):
    """Export shot records as (observable, bitstring, count) CSV rows"""
    with open(path, 'w', newline='') as f:
        writer = csv.DictWriter(f, fieldnames=['observable', 'bitstring', 'count'])
        writer.writeheader()
        for record in records:
            writer.writerows(record.to_rows())


class SimulatorBackend:
    """Executes circuits from |0...0> on the density-matrix simulator"""

    def __init__(self, noise: Optional[NoiseModel] = None):
        """
        Initialize backend

        Args:
            noise: Noise model; None or a noiseless model runs ideal circuits
        """
        self.noise = noise
        self._readout = noise.readout if noise is not None else None
        self._cache_key = None
        self._cache_state = None

    @property
    def name(self) -> str:
        return self.noise.name if self.noise is not None else 'ideal'

    def final_state(self, circuit: Circuit) -> DensityMatrix:
        key = circuit.to_text()
        if key != self._cache_key:
            self._cache_state = apply_circuit(DensityMatrix.zero_state(circuit.n_qubits), circuit, self.noise)
            self._cache_key = key
        return self._cache_state

    def measure(self, circuit: Circuit, setting: PauliString, n_shots: int,
                rng: np.random.Generator) -> ShotRecord:
        """Sample a circuit whose final easy cycle already rotates `setting` onto Z"""
        state = self.final_state(circuit)
        return _sample_z_basis(state.matrix, circuit.n_qubits, setting.unsigned(), n_shots, rng, self._readout)

    def run(self, circuit: Circuit, setting: PauliString, n_shots: int, rng: np.random.Generator) -> ShotRecord:
        """Append the measurement basis for `setting` and sample"""
        return self.measure(append_measurement_basis(circuit, setting), setting, n_shots, rng)

    def exact_expectation(self, circuit: Circuit, pauli: PauliString) -> float:
        """Noisy but shot-free expectation of `pauli` after the circuit (readout excluded)"""
        return expectation(self.final_state(circuit), pauli)
