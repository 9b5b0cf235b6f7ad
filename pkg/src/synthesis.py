"""
Unitary Synthesis Module
Compiles Pauli-generator exponentials and dense unitaries into CZ-based cycle circuits
"""

import logging
from dataclasses import dataclass
from typing import Dict, List, Sequence, Tuple

import numpy as np
from scipy.linalg import cossin, expm, schur

from src.circuit import (
    HADAMARD,
    IDENTITY_2,
    S_DAG,
    Circuit,
    Cycle,
    DecompositionError,
    EasyCycle,
    HardCycle,
    embed_circuit,
    kak_decompose,
    net_unitary,
    phase_distance,
    ry,
    rz,
)
from src.pauli import PauliString

logger = logging.getLogger(__name__)

SHANNON_TOL = 1e-8
IDENTITY_TOL = 1e-10
MAX_SLICES = 64

# Basis change B with B P B^dagger = Z
_BASIS_CHANGE = {'X': HADAMARD, 'Y': HADAMARD @ S_DAG, 'Z': IDENTITY_2}


class SynthesisError(RuntimeError):
    """Raised when Trotter synthesis cannot reach its tolerance within the CZ cap"""


@dataclass
class GeneratorSet:
    """Pauli generators with coefficients a_P of the step unitary exp(-i sum a_P P)"""

    paulis: Tuple[PauliString, ...]
    coefficients: np.ndarray

    def __post_init__(self):
        self.paulis = tuple(self.paulis)
        self.coefficients = np.asarray(self.coefficients, dtype=float)
        if len(self.paulis) != len(self.coefficients):
            raise ValueError(f"{len(self.paulis)} generators but {len(self.coefficients)} coefficients")
        if not self.paulis:
            raise ValueError("Generator set is empty")
        widths = {p.n_qubits for p in self.paulis}
        if len(widths) != 1:
            raise ValueError(f"Generators act on different widths: {sorted(widths)}")

    @classmethod
    def zeros(cls, paulis: Sequence[PauliString]) -> 'GeneratorSet':
        return cls(tuple(paulis), np.zeros(len(paulis)))

    @property
    def n_qubits(self) -> int:
        return self.paulis[0].n_qubits

    def is_zero(self, tol: float = 0.0) -> bool:
        return bool(np.all(np.abs(self.coefficients) <= tol))

    def norm(self) -> float:
        return float(np.linalg.norm(self.coefficients))

    def matrix(self) -> np.ndarray:
        dim = 2 ** self.n_qubits
        total = np.zeros((dim, dim), dtype=complex)
        for pauli, a in zip(self.paulis, self.coefficients):
            total += a * pauli.to_matrix()
        return total

    def unitary(self) -> np.ndarray:
        return expm(-1j * self.matrix())

    def as_dict(self) -> Dict[str, float]:
        return {p.label: float(a) for p, a in zip(self.paulis, self.coefficients)}


def _cnot_cycles(n_qubits: int, control: int, target: int) -> List[Cycle]:
    """CNOT as H on target, CZ, H on target"""
    h_layer = [IDENTITY_2] * n_qubits
    h_layer[target] = HADAMARD
    return [EasyCycle.from_unitaries(h_layer), HardCycle(n_qubits, ((control, target),)), EasyCycle.from_unitaries(h_layer)]


def pauli_exponential_cycles(pauli: PauliString, theta: float) -> List[Cycle]:
    """Cycle list for exp(-i theta P): basis change, CNOT ladder, Rz, ladder back"""
    n = pauli.n_qubits
    if not pauli.is_hermitian:
        raise ValueError(f"Generator {pauli} is not Hermitian")
    if pauli.phase == 2:
        theta, pauli = -theta, pauli.unsigned()
    support = pauli.support
    if not support:
        return [EasyCycle.identity(n)]
    change = [_BASIS_CHANGE.get(s, IDENTITY_2) for s in pauli.symbols]
    cycles: List[Cycle] = [EasyCycle.from_unitaries(change)]
    ladder = list(zip(support[:-1], support[1:]))
    for control, target in ladder:
        cycles.extend(_cnot_cycles(n, control, target))
    rotation = [IDENTITY_2] * n
    rotation[support[-1]] = rz(2 * theta)
    cycles.append(EasyCycle.from_unitaries(rotation))
    for control, target in reversed(ladder):
        cycles.extend(_cnot_cycles(n, control, target))
    cycles.append(EasyCycle.from_unitaries([g.conj().T for g in change]))
    return cycles


def pauli_exponential_circuit(pauli: PauliString, theta: float) -> Circuit:
    """
    Phase-gadget circuit for exp(-i theta P)

    Args:
        pauli: Hermitian Pauli generator
        theta: Rotation coefficient

    Returns:
        Circuit with 2 (weight - 1) CZ cycles
    """
    return Circuit.from_cycles(pauli.n_qubits, pauli_exponential_cycles(pauli, theta))


def _trotter_circuit(generators: GeneratorSet, slices: int) -> Circuit:
    cycles: List[Cycle] = []
    for _ in range(slices):
        for pauli, a in zip(generators.paulis, generators.coefficients):
            if a != 0:
                cycles.extend(pauli_exponential_cycles(pauli, a / slices))
    return Circuit.from_cycles(generators.n_qubits, cycles)


def synthesize(generators: GeneratorSet, tolerance: float = 1e-3, cz_cap: int = 40) -> Circuit:
    """
    Circuit for exp(-i sum a_P P)

    Args:
        generators: Generator set on n <= 3 qubits
        tolerance: Operator-norm bound for the three-qubit product formula
        cz_cap: Maximum CZ count allowed for the product formula

    Returns:
        Exact circuit for n <= 2, first-order product formula for n = 3
    """
    n = generators.n_qubits
    if n > 3:
        raise ValueError(f"Synthesis supports at most 3 qubits, got {n}")
    if generators.is_zero():
        return Circuit.identity(n)
    target = generators.unitary()
    if n == 1:
        return Circuit(1, (EasyCycle.from_unitaries([target]),))
    if n == 2:
        return kak_decompose(target)

    cz_per_slice = sum(2 * (p.weight() - 1) for p, a in zip(generators.paulis, generators.coefficients) if a != 0)
    slices = 1
    while True:
        if cz_per_slice * slices > cz_cap:
            raise SynthesisError(
                f"Product formula needs more than {cz_cap} CZs to reach tolerance {tolerance} "
                f"(generator norm {generators.norm():.4f})"
            )
        circuit = _trotter_circuit(generators, slices)
        error = phase_distance(net_unitary(circuit), target)
        if error <= tolerance:
            logger.debug(f"Product formula: {slices} slice(s), {circuit.cz_count()} CZs, error {error:.2e}")
            return circuit
        if slices >= MAX_SLICES:
            raise SynthesisError(f"Product formula misses tolerance after {slices} slices ({error:.2e})")
        slices += 1


def _demultiplex(a: np.ndarray, b: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """V, D, W with a = V D W and b = V D^dagger W"""
    t, z = schur(a @ b.conj().T, output='complex')
    d = np.sqrt(np.diag(t))
    w = np.diag(d) @ z.conj().T @ b
    return z, d, w


def _multiplexed_rotation(axis: str, angles: Sequence[float]) -> Circuit:
    """
    Rotation about `axis` on qubit 0 by angles[k], k = 2 b1 + b2 set by qubits 1 and 2

    Args:
        axis: 'y' or 'z'
        angles: Four rotation angles

    Returns:
        Circuit with 4 CZ cycles
    """
    rotation = ry if axis == 'y' else rz
    signs = []
    for k in range(4):
        sa = -1.0 if (k >> 1) & 1 else 1.0
        sb = -1.0 if k & 1 else 1.0
        signs.append([1.0, sa, sa * sb, sb])
    betas = np.linalg.solve(np.array(signs), np.asarray(angles, dtype=float))
    cycles: List[Cycle] = []
    for beta, control in zip(betas, (1, 2, 1, 2)):
        cycles.append(EasyCycle.from_unitaries([rotation(beta), IDENTITY_2, IDENTITY_2]))
        cycles.extend(_cnot_cycles(3, control, 0))
    return Circuit.from_cycles(3, cycles)


def _two_qubit_block(u: np.ndarray) -> Circuit:
    return embed_circuit(kak_decompose(u), 3, (1, 2))


def compile_unitary(u: np.ndarray) -> Circuit:
    """
    Exact circuit for a dense unitary on up to three qubits

    Args:
        u: 2x2, 4x4 or 8x8 unitary

    Returns:
        Easy cycle (n=1), KAK circuit (n=2) or Shannon decomposition (n=3, 24 CZs)
    """
    u = np.asarray(u, dtype=complex)
    dim = u.shape[0]
    n = int(round(np.log2(dim)))
    if u.shape != (dim, dim) or 2 ** n != dim or n > 3:
        raise ValueError(f"compile_unitary supports 1 to 3 qubits, got shape {u.shape}")
    if phase_distance(u, np.eye(dim)) < IDENTITY_TOL:
        return Circuit.identity(n)
    if n == 1:
        return Circuit(1, (EasyCycle.from_unitaries([u]),))
    if n == 2:
        return kak_decompose(u)

    left, middle, right = cossin(u, p=4, q=4)
    thetas = [np.arctan2(middle[4 + k, k], middle[k, k]) for k in range(4)]
    v2, d2, w2 = _demultiplex(right[:4, :4], right[4:, 4:])
    v1, d1, w1 = _demultiplex(left[:4, :4], left[4:, 4:])

    circuit = _two_qubit_block(w2)
    circuit = circuit.then(_multiplexed_rotation('z', [-2 * np.angle(x) for x in d2]))
    circuit = circuit.then(_two_qubit_block(v2))
    circuit = circuit.then(_multiplexed_rotation('y', [2 * t for t in thetas]))
    circuit = circuit.then(_two_qubit_block(w1))
    circuit = circuit.then(_multiplexed_rotation('z', [-2 * np.angle(x) for x in d1]))
    circuit = circuit.then(_two_qubit_block(v1))

    error = phase_distance(net_unitary(circuit), u)
    if error > SHANNON_TOL:
        raise DecompositionError(f"Shannon reconstruction error {error:.3e} exceeds {SHANNON_TOL}")
    logger.debug(f"Compiled 3-qubit unitary with {circuit.cz_count()} CZs")
    return circuit
