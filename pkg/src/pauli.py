"""
Pauli Algebra Module
Exact N-qubit Pauli group arithmetic, Clifford conjugation and Pauli transfer matrices
"""

import itertools
import logging
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Dict, Mapping, Optional, Sequence, Tuple

import numpy as np

logger = logging.getLogger(__name__)

SYMBOLS = 'IXYZ'
MAX_PTM_QUBITS = 4

_SYMBOL_BITS = {'I': (0, 0), 'X': (1, 0), 'Y': (1, 1), 'Z': (0, 1)}
_BITS_SYMBOL = {bits: symbol for symbol, bits in _SYMBOL_BITS.items()}

# Phase is stored as the power of i multiplying the Hermitian Pauli product
_PHASE_VALUES = (1, 1j, -1, -1j)
_PHASE_PREFIXES = {0: '', 1: 'i', 2: '-', 3: '-i'}
_PREFIX_PHASES = {'': 0, '+': 0, 'i': 1, '+i': 1, '-': 2, '-i': 3}

# sigma_a * sigma_b = i^k * sigma_c for distinct non-identity symbols
_PRODUCT_PHASE = {
    ('X', 'Y'): 1, ('Y', 'Z'): 1, ('Z', 'X'): 1,
    ('Y', 'X'): 3, ('Z', 'Y'): 3, ('X', 'Z'): 3,
}

SINGLE_QUBIT_MATRICES = {
    'I': np.eye(2, dtype=complex),
    'X': np.array([[0, 1], [1, 0]], dtype=complex),
    'Y': np.array([[0, -1j], [1j, 0]], dtype=complex),
    'Z': np.array([[1, 0], [0, -1]], dtype=complex),
}

CLIFFORD_MATRICES = {
    'H': np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2),
    'S': np.array([[1, 0], [0, 1j]], dtype=complex),
    'X': SINGLE_QUBIT_MATRICES['X'],
    'Y': SINGLE_QUBIT_MATRICES['Y'],
    'Z': SINGLE_QUBIT_MATRICES['Z'],
    'CZ': np.diag([1, 1, 1, -1]).astype(complex),
}


@dataclass(frozen=True)
class PauliString:
    """Signed N-qubit Pauli operator in symplectic (x, z) encoding"""

    n_qubits: int
    x_bits: Tuple[int, ...]
    z_bits: Tuple[int, ...]
    phase: int = 0

    def __post_init__(self):
        if self.n_qubits < 1:
            raise ValueError(f"Pauli string needs at least one qubit, got {self.n_qubits}")
        if len(self.x_bits) != self.n_qubits or len(self.z_bits) != self.n_qubits:
            raise ValueError(
                f"Bit vectors must have length {self.n_qubits}, "
                f"got {len(self.x_bits)} and {len(self.z_bits)}"
            )
        object.__setattr__(self, 'x_bits', tuple(int(b) & 1 for b in self.x_bits))
        object.__setattr__(self, 'z_bits', tuple(int(b) & 1 for b in self.z_bits))
        object.__setattr__(self, 'phase', int(self.phase) % 4)

    @classmethod
    def from_symbols(cls, symbols: str, phase: int = 0) -> 'PauliString':
        """Build from one symbol per qubit, qubit 0 first"""
        if not symbols:
            raise ValueError("Empty Pauli label")
        try:
            bits = [_SYMBOL_BITS[s] for s in symbols.upper()]
        except KeyError as e:
            raise ValueError(f"Invalid Pauli symbol {e} in '{symbols}'")
        return cls(len(symbols), tuple(b[0] for b in bits), tuple(b[1] for b in bits), phase)

    @classmethod
    def from_label(cls, label: str) -> 'PauliString':
        """
        Parse text such as "XIZ", "-YY", "iXZ" or "-iXZ"

        Args:
            label: Optional sign prefix followed by one symbol per qubit

        Returns:
            Parsed PauliString
        """
        text = label.strip()
        split = len(text) - len(text.lstrip('+-i'))
        prefix, symbols = text[:split], text[split:]
        if prefix not in _PREFIX_PHASES:
            raise ValueError(f"Invalid Pauli sign prefix '{prefix}' in '{label}'")
        return cls.from_symbols(symbols, _PREFIX_PHASES[prefix])

    @classmethod
    def identity(cls, n_qubits: int) -> 'PauliString':
        return cls(n_qubits, (0,) * n_qubits, (0,) * n_qubits, 0)

    @classmethod
    def single(cls, n_qubits: int, qubit: int, symbol: str) -> 'PauliString':
        """Pauli acting as `symbol` on one qubit and identity elsewhere"""
        if not 0 <= qubit < n_qubits:
            raise ValueError(f"Qubit {qubit} out of range for {n_qubits} qubits")
        symbols = ['I'] * n_qubits
        symbols[qubit] = symbol
        return cls.from_symbols(''.join(symbols))

    @property
    def symbols(self) -> str:
        return ''.join(_BITS_SYMBOL[(x, z)] for x, z in zip(self.x_bits, self.z_bits))

    @property
    def label(self) -> str:
        return _PHASE_PREFIXES[self.phase] + self.symbols

    @property
    def coefficient(self) -> complex:
        return _PHASE_VALUES[self.phase]

    @property
    def is_identity(self) -> bool:
        return not any(self.x_bits) and not any(self.z_bits)

    @property
    def is_hermitian(self) -> bool:
        return self.phase % 2 == 0

    @property
    def support(self) -> Tuple[int, ...]:
        return tuple(q for q in range(self.n_qubits) if self.x_bits[q] or self.z_bits[q])

    def weight(self) -> int:
        return len(self.support)

    def y_count(self) -> int:
        return sum(1 for x, z in zip(self.x_bits, self.z_bits) if x and z)

    def unsigned(self) -> 'PauliString':
        if self.phase == 0:
            return self
        return PauliString(self.n_qubits, self.x_bits, self.z_bits, 0)

    def negated(self) -> 'PauliString':
        return PauliString(self.n_qubits, self.x_bits, self.z_bits, self.phase + 2)

    def to_matrix(self) -> np.ndarray:
        matrix = np.array([[1.0 + 0j]])
        for symbol in self.symbols:
            matrix = np.kron(matrix, SINGLE_QUBIT_MATRICES[symbol])
        return self.coefficient * matrix

    def __str__(self) -> str:
        return self.label


def _check_same_size(p: PauliString, q: PauliString):
    if p.n_qubits != q.n_qubits:
        raise ValueError(f"Dimension mismatch: {p.n_qubits} vs {q.n_qubits} qubits")


def pauli_mul(p: PauliString, q: PauliString) -> PauliString:
    """
    Multiply two Pauli strings exactly

    Args:
        p: Left factor
        q: Right factor

    Returns:
        R with matrix(p) @ matrix(q) == matrix(R), phase included
    """
    _check_same_size(p, q)
    phase = p.phase + q.phase
    for a, b in zip(p.symbols, q.symbols):
        phase += _PRODUCT_PHASE.get((a, b), 0)
    x_bits = tuple(a ^ b for a, b in zip(p.x_bits, q.x_bits))
    z_bits = tuple(a ^ b for a, b in zip(p.z_bits, q.z_bits))
    return PauliString(p.n_qubits, x_bits, z_bits, phase)


def commutes(p: PauliString, q: PauliString) -> bool:
    """True when the symplectic inner product vanishes"""
    _check_same_size(p, q)
    product = sum(xp * zq + zp * xq for xp, zp, xq, zq in zip(p.x_bits, p.z_bits, q.x_bits, q.z_bits))
    return product % 2 == 0


@lru_cache(maxsize=None)
def pauli_basis(n_qubits: int) -> Tuple[PauliString, ...]:
    """All 4^n unsigned Paulis, lexicographic in I,X,Y,Z with qubit 0 most significant"""
    return tuple(PauliString.from_symbols(''.join(s)) for s in itertools.product(SYMBOLS, repeat=n_qubits))


def pauli_index(p: PauliString) -> int:
    index = 0
    for symbol in p.symbols:
        index = 4 * index + SYMBOLS.index(symbol)
    return index


@lru_cache(maxsize=None)
def basis_matrices(n_qubits: int) -> np.ndarray:
    """Stack of the basis Pauli matrices, shape (4^n, 2^n, 2^n)"""
    return np.array([p.to_matrix() for p in pauli_basis(n_qubits)])


def non_identity_paulis(n_qubits: int) -> Tuple[PauliString, ...]:
    return pauli_basis(n_qubits)[1:]


def decompose_operator(matrix: np.ndarray, tol: float = 1e-12) -> Dict[PauliString, complex]:
    """Pauli coefficients c_P = Tr(P M) / 2^n of a square matrix, small entries dropped"""
    dim = matrix.shape[0]
    n_qubits = int(round(np.log2(dim)))
    coefficients = np.einsum('kab,ba->k', basis_matrices(n_qubits), matrix) / dim
    return {p: complex(c) for p, c in zip(pauli_basis(n_qubits), coefficients) if abs(c) > tol}


@dataclass(frozen=True)
class CliffordGate:
    """Named Clifford gate placed on specific qubits"""

    name: str
    qubits: Tuple[int, ...]

    def __post_init__(self):
        name = self.name.upper()
        if name not in CLIFFORD_MATRICES:
            raise ValueError(f"Gate '{self.name}' is not in the supported Clifford set")
        expected = 2 if name == 'CZ' else 1
        if len(self.qubits) != expected:
            raise ValueError(f"Gate {name} acts on {expected} qubit(s), got {self.qubits}")
        if len(set(self.qubits)) != len(self.qubits):
            raise ValueError(f"Gate {name} needs distinct qubits, got {self.qubits}")
        object.__setattr__(self, 'name', name)
        object.__setattr__(self, 'qubits', tuple(int(q) for q in self.qubits))


def _identify_pauli(matrix: np.ndarray) -> Tuple[str, int]:
    """Match a signed Pauli matrix against the basis, returning (symbols, phase)"""
    n_qubits = int(round(np.log2(matrix.shape[0])))
    for p in pauli_basis(n_qubits):
        overlap = np.trace(p.to_matrix().conj().T @ matrix) / matrix.shape[0]
        if abs(abs(overlap) - 1.0) < 1e-9:
            phase = _PHASE_VALUES.index(min(_PHASE_VALUES, key=lambda v: abs(v - overlap)))
            return p.symbols, phase
    raise ValueError("Matrix is not a signed Pauli operator")


@lru_cache(maxsize=None)
def _conjugation_table(gate_name: str) -> Dict[str, Tuple[str, int]]:
    """Images of every local Pauli under G P G^dagger, built from dense conjugation"""
    g = CLIFFORD_MATRICES[gate_name]
    width = 2 if gate_name == 'CZ' else 1
    table = {}
    for p in pauli_basis(width):
        image = g @ p.to_matrix() @ g.conj().T
        table[p.symbols] = _identify_pauli(image)
    logger.debug(f"Built conjugation table for {gate_name}")
    return table


def conjugate_through(p: PauliString, gate: CliffordGate) -> PauliString:
    """
    Conjugate a Pauli through a Clifford gate

    Args:
        p: Pauli to propagate
        gate: CZ on a pair or a named single-qubit Clifford

    Returns:
        Signed Pauli equal to G P G^dagger
    """
    for q in gate.qubits:
        if not 0 <= q < p.n_qubits:
            raise ValueError(f"Gate qubit {q} out of range for {p.n_qubits} qubits")
    symbols = list(p.symbols)
    local = ''.join(symbols[q] for q in gate.qubits)
    image, extra_phase = _conjugation_table(gate.name)[local]
    for q, symbol in zip(gate.qubits, image):
        symbols[q] = symbol
    return PauliString.from_symbols(''.join(symbols), p.phase + extra_phase)


@dataclass(eq=False)
class Channel:
    """Quantum channel on n qubits given by its Kraus operators"""

    n_qubits: int
    kraus: Tuple[np.ndarray, ...] = field(default_factory=tuple)

    @classmethod
    def unitary(cls, matrix: np.ndarray) -> 'Channel':
        matrix = np.asarray(matrix, dtype=complex)
        return cls(int(round(np.log2(matrix.shape[0]))), (matrix,))

    @classmethod
    def from_kraus(cls, operators: Sequence[np.ndarray]) -> 'Channel':
        operators = tuple(np.asarray(k, dtype=complex) for k in operators)
        if not operators:
            raise ValueError("Kraus set is empty")
        return cls(int(round(np.log2(operators[0].shape[0]))), operators)

    @classmethod
    def pauli(cls, probabilities: Mapping[PauliString, float], n_qubits: int) -> 'Channel':
        """Stochastic Pauli channel; the identity takes the remaining probability"""
        total = sum(probabilities.values())
        if any(p < 0 for p in probabilities.values()) or total > 1 + 1e-12:
            raise ValueError(f"Invalid Pauli probabilities (sum {total})")
        operators = [np.sqrt(max(1.0 - total, 0.0)) * np.eye(2 ** n_qubits, dtype=complex)]
        for pauli, prob in probabilities.items():
            if pauli.n_qubits != n_qubits:
                raise ValueError(f"Pauli {pauli} does not act on {n_qubits} qubits")
            if prob > 0:
                operators.append(np.sqrt(prob) * pauli.unsigned().to_matrix())
        return cls(n_qubits, tuple(operators))

    @classmethod
    def depolarizing(cls, n_qubits: int, strength: float) -> 'Channel':
        """rho -> (1 - p) rho + p I / 2^n"""
        share = strength / 4 ** n_qubits
        return cls.pauli({p: share for p in non_identity_paulis(n_qubits)}, n_qubits)

    def completeness_error(self) -> float:
        dim = 2 ** self.n_qubits
        total = sum(k.conj().T @ k for k in self.kraus)
        return float(np.linalg.norm(total - np.eye(dim)))


@dataclass(eq=False)
class PTM:
    """Real Pauli transfer matrix in the normalized Pauli basis"""

    n_qubits: int
    matrix: np.ndarray

    def diagonal(self) -> np.ndarray:
        return np.diag(self.matrix).copy()

    def decays(self) -> Dict[PauliString, float]:
        """Diagonal entries keyed by non-identity Pauli"""
        diag = self.diagonal()
        return {p: float(diag[i]) for i, p in enumerate(pauli_basis(self.n_qubits)) if i > 0}

    def compose(self, other: 'PTM') -> 'PTM':
        """Channel that applies `other` first, then self"""
        return PTM(self.n_qubits, self.matrix @ other.matrix)

    def is_trace_preserving(self, tol: float = 1e-10) -> bool:
        first_row = np.zeros(4 ** self.n_qubits)
        first_row[0] = 1.0
        return bool(np.allclose(self.matrix[0], first_row, atol=tol))

    def is_orthogonal(self, tol: float = 1e-10) -> bool:
        return bool(np.allclose(self.matrix.T @ self.matrix, np.eye(4 ** self.n_qubits), atol=tol))


def ptm_of(channel: Channel) -> PTM:
    """
    Pauli transfer matrix M[i][j] = Tr(P_i channel(P_j)) / 2^n

    Args:
        channel: Channel given as unitary, Pauli channel or Kraus set

    Returns:
        PTM of the channel
    """
    n = channel.n_qubits
    if n > MAX_PTM_QUBITS:
        raise ValueError(f"PTM construction supports at most {MAX_PTM_QUBITS} qubits, got {n}")
    error = channel.completeness_error()
    if error > 1e-10:
        raise ValueError(f"Kraus set violates completeness by {error:.3e}")
    basis = basis_matrices(n)
    dim = 2 ** n
    matrix = np.zeros((4 ** n, 4 ** n))
    for k in channel.kraus:
        images = np.einsum('ab,jbc,dc->jad', k, basis, k.conj())
        matrix += np.real(np.einsum('ida,jad->ij', basis, images)) / dim
    return PTM(n, matrix)


def pauli_ptm_signs(t: PauliString) -> np.ndarray:
    """Diagonal of the PTM of conjugation by Pauli t (+1 commuting, -1 anticommuting)"""
    return np.array([1.0 if commutes(t, p) else -1.0 for p in pauli_basis(t.n_qubits)])


def random_pauli(n_qubits: int, rng: np.random.Generator) -> PauliString:
    """Uniformly random unsigned Pauli, identity included"""
    symbols = rng.integers(0, 4, size=n_qubits)
    return PauliString.from_symbols(''.join(SYMBOLS[s] for s in symbols))


def parse_pauli_map(mapping: Optional[Mapping[str, float]]) -> Dict[PauliString, float]:
    """Convert {"XIZ": value} config sections into Pauli-keyed dicts"""
    return {PauliString.from_label(label): float(value) for label, value in (mapping or {}).items()}
