"""
Cycle Circuit Module
Alternating easy/hard cycle circuits, Haar sampling, KAK and ZXZXZ decompositions
"""

import logging
import re
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from src.pauli import CliffordGate, PauliString

logger = logging.getLogger(__name__)

UNITARY_TOL = 1e-8
KAK_TOL = 1e-8

Angles = Tuple[float, float, float, float, float]

HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
S_GATE = np.array([[1, 0], [0, 1j]], dtype=complex)
S_DAG = S_GATE.conj().T
IDENTITY_2 = np.eye(2, dtype=complex)

# Magic (Bell) basis: local unitaries become real orthogonal matrices
MAGIC = np.array([
    [1, 1j, 0, 0],
    [0, 0, 1j, 1],
    [0, 0, 1j, -1],
    [1, -1j, 0, 0],
], dtype=complex) / np.sqrt(2)

_XX = np.kron([[0, 1], [1, 0]], [[0, 1], [1, 0]]).astype(complex)
_YY = np.kron([[0, -1j], [1j, 0]], [[0, -1j], [1j, 0]]).astype(complex)
_ZZ = np.diag([1, -1, -1, 1]).astype(complex)


class DecompositionError(RuntimeError):
    """Raised when a synthesized circuit does not reproduce its target unitary"""


def rz(theta: float) -> np.ndarray:
    return np.array([[np.exp(-0.5j * theta), 0], [0, np.exp(0.5j * theta)]], dtype=complex)


def rx(theta: float) -> np.ndarray:
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[c, -1j * s], [-1j * s, c]], dtype=complex)


def ry(theta: float) -> np.ndarray:
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


def _wrap(angle: float) -> float:
    """Wrap into (-pi, pi]"""
    wrapped = (angle + np.pi) % (2 * np.pi) - np.pi
    return float(np.pi if wrapped == -np.pi else wrapped)


def is_unitary(matrix: np.ndarray, tol: float = UNITARY_TOL) -> bool:
    matrix = np.asarray(matrix)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        return False
    return bool(np.linalg.norm(matrix.conj().T @ matrix - np.eye(matrix.shape[0])) < tol)


def phase_distance(u: np.ndarray, v: np.ndarray) -> float:
    """Operator-norm distance between u and v after removing the best global phase"""
    overlap = np.trace(v.conj().T @ u)
    phase = overlap / abs(overlap) if abs(overlap) > 1e-12 else 1.0
    return float(np.linalg.norm(u - phase * v, ord=2))


def zxzxz_angles(v: np.ndarray) -> Angles:
    """
    Decompose a single-qubit unitary as Rz(z3) Rx(pi/2) Rz(z2) Rx(pi/2) Rz(z1)

    Args:
        v: 2x2 unitary (a global scale factor is tolerated)

    Returns:
        Tuple (z1, x1, z2, x2, z3) in circuit order, x1 = x2 = pi/2
    """
    v = np.asarray(v, dtype=complex)
    if v.shape != (2, 2):
        raise ValueError(f"Expected a 2x2 unitary, got shape {v.shape}")
    det = np.linalg.det(v)
    if abs(det) < 1e-12 or not is_unitary(v / np.sqrt(det)):
        raise ValueError("Input is not unitary")
    v = v / np.sqrt(det)
    a, b = v[0, 0], v[1, 0]
    theta = 2 * np.arctan2(abs(b), abs(a))
    alpha = np.angle(b) - np.angle(a)
    beta = -np.angle(a) - np.angle(b)
    # Ry(theta) = Rz(pi) Rx(pi/2) Rz(theta - pi) Rx(pi/2) up to phase
    return (_wrap(beta), np.pi / 2, _wrap(theta - np.pi), np.pi / 2, _wrap(alpha + np.pi))


def unitary_from_angles(angles: Sequence[float]) -> np.ndarray:
    z1, x1, z2, x2, z3 = angles
    return rz(z3) @ rx(x2) @ rz(z2) @ rx(x1) @ rz(z1)


def kron_all(matrices: Sequence[np.ndarray]) -> np.ndarray:
    result = np.array([[1.0 + 0j]])
    for m in matrices:
        result = np.kron(result, m)
    return result


@dataclass(frozen=True)
class EasyCycle:
    """One SU(2) gate per qubit, stored as ZXZXZ angles"""

    angles: Tuple[Angles, ...]

    @property
    def n_qubits(self) -> int:
        return len(self.angles)

    @classmethod
    def identity(cls, n_qubits: int) -> 'EasyCycle':
        return cls.from_unitaries([IDENTITY_2] * n_qubits)

    @classmethod
    def from_unitaries(cls, unitaries: Sequence[np.ndarray]) -> 'EasyCycle':
        return cls(tuple(zxzxz_angles(u) for u in unitaries))

    def unitaries(self) -> List[np.ndarray]:
        return [unitary_from_angles(a) for a in self.angles]

    def matrix(self) -> np.ndarray:
        return kron_all(self.unitaries())

    def followed_by(self, gates: Sequence[np.ndarray]) -> 'EasyCycle':
        """Cycle that applies self and then `gates` (one 2x2 per qubit)"""
        return EasyCycle.from_unitaries([g @ u for g, u in zip(gates, self.unitaries())])

    def preceded_by(self, gates: Sequence[np.ndarray]) -> 'EasyCycle':
        """Cycle that applies `gates` and then self"""
        return EasyCycle.from_unitaries([u @ g for g, u in zip(gates, self.unitaries())])

    def to_text(self) -> str:
        parts = [f"q{q}:({','.join(repr(float(x)) for x in a)})" for q, a in enumerate(self.angles)]
        return 'easy ' + ' '.join(parts)


@dataclass(frozen=True)
class HardCycle:
    """Layer of disjoint CZ gates; unpaired qubits idle"""

    n_qubits: int
    pairs: Tuple[Tuple[int, int], ...] = ()

    def __post_init__(self):
        normalized = []
        used = set()
        for pair in self.pairs:
            a, b = sorted(int(q) for q in pair)
            if a == b or a < 0 or b >= self.n_qubits:
                raise ValueError(f"Invalid CZ pair {pair} for {self.n_qubits} qubits")
            if a in used or b in used:
                raise ValueError(f"CZ pairs overlap on qubit(s) of {pair}")
            used.update((a, b))
            normalized.append((a, b))
        object.__setattr__(self, 'pairs', tuple(sorted(normalized)))

    @property
    def idle_qubits(self) -> Tuple[int, ...]:
        used = {q for pair in self.pairs for q in pair}
        return tuple(q for q in range(self.n_qubits) if q not in used)

    @property
    def signature(self) -> str:
        body = ' '.join(f"cz:({a},{b})" for a, b in self.pairs) or 'idle'
        return f"{body}/n={self.n_qubits}"

    def clifford_gates(self) -> List[CliffordGate]:
        return [CliffordGate('CZ', pair) for pair in self.pairs]

    def matrix(self) -> np.ndarray:
        dim = 2 ** self.n_qubits
        diag = np.ones(dim, dtype=complex)
        for index in range(dim):
            bits = [(index >> (self.n_qubits - 1 - q)) & 1 for q in range(self.n_qubits)]
            for a, b in self.pairs:
                if bits[a] and bits[b]:
                    diag[index] *= -1
        return np.diag(diag)

    def to_text(self) -> str:
        return ' '.join(['hard'] + [f"cz:({a},{b})" for a, b in self.pairs])


Cycle = Union[EasyCycle, HardCycle]


@dataclass(frozen=True)
class Circuit:
    """Alternating easy/hard cycle circuit that begins and ends with an easy cycle"""

    n_qubits: int
    cycles: Tuple[Cycle, ...]

    def __post_init__(self):
        if not self.cycles or len(self.cycles) % 2 == 0:
            raise ValueError("Circuit must alternate easy and hard cycles, starting and ending easy")
        for i, cycle in enumerate(self.cycles):
            expected = EasyCycle if i % 2 == 0 else HardCycle
            if not isinstance(cycle, expected):
                raise ValueError(f"Cycle {i} should be {expected.__name__}")
            if cycle.n_qubits != self.n_qubits:
                raise ValueError(f"Cycle {i} acts on {cycle.n_qubits} qubits, expected {self.n_qubits}")

    @classmethod
    def from_cycles(cls, n_qubits: int, cycles: Sequence[Cycle]) -> 'Circuit':
        """Normalize any cycle sequence: merge adjacent easy cycles, pad with identities"""
        normalized: List[Cycle] = []
        for cycle in cycles:
            if isinstance(cycle, EasyCycle):
                if normalized and isinstance(normalized[-1], EasyCycle):
                    normalized[-1] = normalized[-1].followed_by(cycle.unitaries())
                else:
                    normalized.append(cycle)
            else:
                if not normalized or isinstance(normalized[-1], HardCycle):
                    normalized.append(EasyCycle.identity(n_qubits))
                normalized.append(cycle)
        if not normalized or isinstance(normalized[-1], HardCycle):
            normalized.append(EasyCycle.identity(n_qubits))
        return cls(n_qubits, tuple(normalized))

    @classmethod
    def identity(cls, n_qubits: int) -> 'Circuit':
        return cls(n_qubits, (EasyCycle.identity(n_qubits),))

    @property
    def hard_cycles(self) -> List[HardCycle]:
        return list(self.cycles[1::2])

    def hard_cycle_count(self) -> int:
        return len(self.cycles) // 2

    def cz_count(self) -> int:
        return sum(len(cycle.pairs) for cycle in self.hard_cycles)

    def then(self, other: 'Circuit') -> 'Circuit':
        """Circuit running self first and `other` afterwards"""
        if other.n_qubits != self.n_qubits:
            raise ValueError("Cannot compose circuits of different widths")
        joint = self.cycles[-1].followed_by(other.cycles[0].unitaries())
        return Circuit(self.n_qubits, self.cycles[:-1] + (joint,) + other.cycles[1:])

    def replace_cycle(self, index: int, cycle: Cycle) -> 'Circuit':
        cycles = list(self.cycles)
        cycles[index] = cycle
        return Circuit(self.n_qubits, tuple(cycles))

    def to_text(self) -> str:
        return '\n'.join(cycle.to_text() for cycle in self.cycles)

    @classmethod
    def from_text(cls, text: str) -> 'Circuit':
        """Parse the line format written by to_text"""
        cycles: List[Cycle] = []
        n_qubits: Optional[int] = None
        pending_hard: List[List[Tuple[int, int]]] = []
        for line in (ln.strip() for ln in text.splitlines()):
            if not line:
                continue
            kind, _, body = line.partition(' ')
            if kind == 'easy':
                entries = re.findall(r'q(\d+):\(([^)]*)\)', body)
                angles = [tuple(float(x) for x in values.split(',')) for _, values in sorted(entries, key=lambda e: int(e[0]))]
                if any(len(a) != 5 for a in angles):
                    raise ValueError(f"Easy cycle needs five angles per qubit: '{line}'")
                n_qubits = len(angles)
                cycles.append(EasyCycle(tuple(angles)))
            elif kind == 'hard':
                pairs = [(int(a), int(b)) for a, b in re.findall(r'cz:\((\d+),(\d+)\)', body)]
                cycles.append(None)
                pending_hard.append(pairs)
            else:
                raise ValueError(f"Unknown cycle line: '{line}'")
        if n_qubits is None:
            raise ValueError("Circuit text contains no easy cycle")
        hard_iter = iter(pending_hard)
        resolved = [c if c is not None else HardCycle(n_qubits, tuple(next(hard_iter))) for c in cycles]
        return cls(n_qubits, tuple(resolved))


def hard_cycle_count(circuit: Circuit) -> int:
    return circuit.hard_cycle_count()


def net_unitary(circuit: Circuit) -> np.ndarray:
    """Product of all cycle unitaries in time order"""
    unitary = np.eye(2 ** circuit.n_qubits, dtype=complex)
    for cycle in circuit.cycles:
        unitary = cycle.matrix() @ unitary
    return unitary


def haar_random_unitary(n_qubits: int, rng: np.random.Generator) -> np.ndarray:
    """
    Haar-random SU(2^n) matrix from a Ginibre draw and a phase-corrected QR

    Args:
        n_qubits: Register width (at most 4)
        rng: Explicit seeded generator

    Returns:
        Unitary with determinant 1
    """
    if not 1 <= n_qubits <= 4:
        raise ValueError(f"Haar sampling supports 1 to 4 qubits, got {n_qubits}")
    dim = 2 ** n_qubits
    ginibre = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(ginibre)
    diag = np.diag(r)
    q = q * (diag / np.abs(diag))
    return q / np.linalg.det(q) ** (1.0 / dim)


def _real_orthogonal_diagonalizer(m: np.ndarray) -> np.ndarray:
    """Real orthogonal P with P^T m P diagonal, for complex symmetric m with commuting parts"""
    best, best_error = None, np.inf
    for weight in (1.0, 0.6180339887, 2.7182818285, 0.3183098862, 1.4142135624, 5.0, 0.1):
        _, p = np.linalg.eigh(m.real + weight * m.imag)
        rotated = p.T @ m @ p
        error = np.linalg.norm(rotated - np.diag(np.diag(rotated)))
        if error < best_error:
            best, best_error = p, error
        if error < 1e-12:
            break
    return best


def _tensor_factors(k: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Split a 4x4 product unitary into A (qubit 0) and B (qubit 1) with A kron B = k"""
    reshuffled = k.reshape(2, 2, 2, 2).transpose(0, 2, 1, 3).reshape(4, 4)
    u, s, vh = np.linalg.svd(reshuffled)
    a = np.sqrt(s[0]) * u[:, 0].reshape(2, 2)
    b = np.sqrt(s[0]) * vh[0, :].reshape(2, 2)
    return a, b


def _canonical_coordinates(d: np.ndarray) -> Tuple[float, float, float]:
    """(a, b, c) with E diag(d) E^dagger = phase * exp(i(a XX + b YY + c ZZ))"""
    signs = [np.real(np.diag(MAGIC.conj().T @ p @ MAGIC)) for p in (_XX, _YY, _ZZ)]
    system = np.column_stack([np.ones(4)] + signs)
    _, a, b, c = np.linalg.solve(system, np.angle(d))
    return float(a), float(b), float(c)


def kak_decompose(u: np.ndarray) -> Circuit:
    """
    Decompose a two-qubit unitary into 4 easy cycles around 3 CZ cycles

    Args:
        u: 4x4 unitary

    Returns:
        Circuit whose net unitary equals u up to global phase
    """
    u = np.asarray(u, dtype=complex)
    if u.shape != (4, 4) or not is_unitary(u):
        raise ValueError("kak_decompose expects a 4x4 unitary")

    u_magic = MAGIC.conj().T @ u @ MAGIC
    m = u_magic.T @ u_magic
    o2 = _real_orthogonal_diagonalizer(m)
    if np.linalg.det(o2) < 0:
        o2[:, 0] *= -1
    d = np.sqrt(np.diag(o2.T @ m @ o2).astype(complex))
    o1 = np.real(u_magic @ o2 @ np.diag(1.0 / d))
    if np.linalg.det(o1) < 0:
        d[0] *= -1
        o1[:, 0] *= -1

    a1, b1 = _tensor_factors(MAGIC @ o1 @ MAGIC.conj().T)
    a2, b2 = _tensor_factors(MAGIC @ o2.T @ MAGIC.conj().T)
    xa, yb, zc = _canonical_coordinates(d)

    # exp(i(a XX + b YY + c ZZ)) with CZ as the entangler, time order left to right
    x_rot = lambda t: np.cos(t) * IDENTITY_2 + 1j * np.sin(t) * np.array([[0, 1], [1, 0]])
    z_rot = lambda t: np.diag([np.exp(1j * t), np.exp(-1j * t)])
    cz = HardCycle(2, ((0, 1),))
    layers = [
        EasyCycle.from_unitaries([a2, HADAMARD @ S_DAG @ b2]),
        cz,
        EasyCycle.from_unitaries([x_rot(-yb) @ S_GATE, S_GATE @ HADAMARD]),
        cz,
        EasyCycle.from_unitaries([x_rot(xa), HADAMARD @ z_rot(zc)]),
        cz,
        EasyCycle.from_unitaries([a1, b1 @ HADAMARD]),
    ]
    circuit = Circuit(2, tuple(layers))
    error = phase_distance(net_unitary(circuit), u)
    if error > KAK_TOL:
        raise DecompositionError(f"KAK reconstruction error {error:.3e} exceeds {KAK_TOL}")
    return circuit


def measurement_rotation(symbol: str) -> np.ndarray:
    """Single-qubit rotation mapping the eigenbasis of `symbol` onto the Z basis"""
    if symbol == 'X':
        return ry(-np.pi / 2)
    if symbol == 'Y':
        return rx(np.pi / 2)
    return IDENTITY_2


def preparation_rotation(symbol: str) -> np.ndarray:
    """Rotation taking |0> to the +1 eigenstate of `symbol`"""
    return measurement_rotation(symbol).conj().T


def append_measurement_basis(circuit: Circuit, observable: PauliString) -> Circuit:
    """
    Compile the measurement-basis change for `observable` into the final easy cycle

    Args:
        circuit: Circuit to extend
        observable: Non-identity Pauli to be measured

    Returns:
        Circuit with the same hard cycles whose Z-basis readout measures `observable`
    """
    if observable.is_identity:
        raise ValueError("Cannot build a measurement basis for the identity")
    if observable.n_qubits != circuit.n_qubits:
        raise ValueError(f"Observable width {observable.n_qubits} does not match circuit {circuit.n_qubits}")
    rotations = [measurement_rotation(s) for s in observable.symbols]
    return circuit.replace_cycle(len(circuit.cycles) - 1, circuit.cycles[-1].followed_by(rotations))


def embed_circuit(circuit: Circuit, n_qubits: int, qubit_map: Sequence[int]) -> Circuit:
    """Place a circuit on the given qubits of a wider register"""
    if len(qubit_map) != circuit.n_qubits:
        raise ValueError("qubit_map must name one target qubit per circuit qubit")
    cycles: List[Cycle] = []
    for cycle in circuit.cycles:
        if isinstance(cycle, EasyCycle):
            gates = [IDENTITY_2] * n_qubits
            for local, target in enumerate(qubit_map):
                gates[target] = unitary_from_angles(cycle.angles[local])
            cycles.append(EasyCycle.from_unitaries(gates))
        else:
            pairs = tuple((qubit_map[a], qubit_map[b]) for a, b in cycle.pairs)
            cycles.append(HardCycle(n_qubits, pairs))
    return Circuit(n_qubits, tuple(cycles))


def random_kak_circuit(n_blocks: int, rng: np.random.Generator) -> Circuit:
    """
    Two-qubit random circuit of 3 * n_blocks CZ cycles

    Args:
        n_blocks: Number of KAK-decomposed Haar SU(4) blocks; 0 gives a random product layer
        rng: Seeded generator

    Returns:
        Concatenated circuit
    """
    if n_blocks < 0:
        raise ValueError(f"n_blocks must be non-negative, got {n_blocks}")
    if n_blocks == 0:
        return Circuit(2, (EasyCycle.from_unitaries([haar_random_unitary(1, rng), haar_random_unitary(1, rng)]),))
    circuit = kak_decompose(haar_random_unitary(2, rng))
    for _ in range(n_blocks - 1):
        circuit = circuit.then(kak_decompose(haar_random_unitary(2, rng)))
    return circuit


def basis_state_circuit(bitstring: str) -> Circuit:
    """Easy cycle flipping |0...0> into the computational state `bitstring`"""
    x_gate = np.array([[0, 1], [1, 0]], dtype=complex)
    return Circuit(len(bitstring), (EasyCycle.from_unitaries([x_gate if b == '1' else IDENTITY_2 for b in bitstring]),))
