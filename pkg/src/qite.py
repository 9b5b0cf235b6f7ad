"""
Quantum Imaginary Time Evolution Module
Transverse-field Ising model, symmetry-reduced supports, the QITE step and trajectory runner
"""

import csv
import json
import logging
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.linalg import expm

from src.circuit import IDENTITY_2, Circuit, EasyCycle, basis_state_circuit, net_unitary, ry
from src.mitigation import (
    ExpectationSet,
    McWeenyError,
    MitigationRefused,
    bloch_length,
    fidelity_from_expectations,
    mcweeny,
    rescale,
)
from src.pauli import PauliString, commutes, decompose_operator, non_identity_paulis, pauli_mul
from src.randomized_compiling import RcPlan, rc_records
from src.seeding import derive_seed, task_rng
from src.simulator import DensityMatrix, SimulatorBackend, estimate_expectation, expectation, is_compatible, tomography
from src.synthesis import GeneratorSet, SynthesisError, compile_unitary, synthesize

logger = logging.getLogger(__name__)

MITIGATION_MODES = ('none', 'rescale', 'rescale+mcweeny')
EXCITED_METHODS = ('parity', 'shift')
MAX_ORACLE_QUBITS = 4
COND_LIMIT = 1e12
NORM_FLOOR = 0.1
SHIFT_TILT = np.pi / 4


class QiteSystemError(ValueError):
    """Raised for a singular QITE system without ridge or a missing expectation"""


@dataclass
class Hamiltonian:
    """Real linear combination of Pauli strings"""

    n_qubits: int
    terms: Dict[PauliString, float]

    def __post_init__(self):
        for pauli in self.terms:
            if pauli.n_qubits != self.n_qubits or pauli.phase != 0:
                raise ValueError(f"Hamiltonian term {pauli} must be an unsigned {self.n_qubits}-qubit Pauli")

    @classmethod
    def from_matrix(cls, matrix: np.ndarray, tol: float = 1e-12) -> 'Hamiltonian':
        """Pauli expansion of a Hermitian matrix"""
        matrix = np.asarray(matrix, dtype=complex)
        if np.linalg.norm(matrix - matrix.conj().T) > 1e-10:
            raise ValueError("Hamiltonian matrix is not Hermitian")
        coefficients = decompose_operator(matrix, tol)
        n = int(round(np.log2(matrix.shape[0])))
        return cls(n, {p: float(c.real) for p, c in coefficients.items()})

    def matrix(self) -> np.ndarray:
        dim = 2 ** self.n_qubits
        total = np.zeros((dim, dim), dtype=complex)
        for pauli, coefficient in self.terms.items():
            total += coefficient * pauli.to_matrix()
        return total

    def energy(self, expectations: ExpectationSet) -> float:
        return float(sum(c * np.real(expectations.value(p)) for p, c in self.terms.items()))

    def labels(self) -> Dict[str, float]:
        return {p.label: c for p, c in self.terms.items()}


def tfim(n_qubits: int, coupling: float, field_strength: float) -> Hamiltonian:
    """
    Open-chain transverse-field Ising model J sum X_i X_{i+1} + h sum Z_i

    Args:
        n_qubits: Chain length
        coupling: J
        field_strength: h

    Returns:
        Hamiltonian with n - 1 XX terms and n Z terms
    """
    if n_qubits < 1:
        raise ValueError(f"Chain needs at least one site, got {n_qubits}")
    terms: Dict[PauliString, float] = {}
    for i in range(n_qubits - 1):
        symbols = ['I'] * n_qubits
        symbols[i] = symbols[i + 1] = 'X'
        terms[PauliString.from_symbols(''.join(symbols))] = float(coupling)
    for i in range(n_qubits):
        terms[PauliString.single(n_qubits, i, 'Z')] = float(field_strength)
    return Hamiltonian(n_qubits, terms)


def parity_operator(n_qubits: int) -> PauliString:
    return PauliString.from_symbols('Z' * n_qubits)


def state_parity(vector: np.ndarray) -> int:
    """Sign of <Z...Z> for a state of definite parity"""
    n = int(round(np.log2(vector.size)))
    value = np.real(np.vdot(vector, parity_operator(n).to_matrix() @ vector))
    return 1 if value >= 0 else -1


@dataclass
class GroundStateInfo:
    """Dense diagonalization results"""

    energies: np.ndarray
    ground_energy: float
    ground_state: np.ndarray
    excited_energy: float
    excited_state: np.ndarray
    degenerate: bool
    ground_parity: int
    excited_parity: int


def exact_ground(hamiltonian: Hamiltonian) -> GroundStateInfo:
    """
    Ground and first excited states by dense diagonalization

    Args:
        hamiltonian: Hamiltonian on at most 4 qubits

    Returns:
        GroundStateInfo with ascending energies
    """
    if hamiltonian.n_qubits > MAX_ORACLE_QUBITS:
        raise ValueError(f"Dense oracle supports at most {MAX_ORACLE_QUBITS} qubits")
    energies, vectors = np.linalg.eigh(hamiltonian.matrix())
    degenerate = bool(len(energies) > 1 and energies[1] - energies[0] < 1e-9)
    if degenerate:
        logger.warning(f"⚠️ Degenerate ground space (gap {energies[1] - energies[0]:.2e})")
    excited_energy = float(energies[1]) if len(energies) > 1 else float('nan')
    excited_state = vectors[:, 1] if len(energies) > 1 else vectors[:, 0]
    return GroundStateInfo(
        energies=energies,
        ground_energy=float(energies[0]),
        ground_state=vectors[:, 0],
        excited_energy=excited_energy,
        excited_state=excited_state,
        degenerate=degenerate,
        ground_parity=state_parity(vectors[:, 0]),
        excited_parity=state_parity(excited_state),
    )


def sector_ground(hamiltonian: Hamiltonian, parity: int) -> Tuple[float, np.ndarray]:
    """Lowest eigenpair within the Z...Z = parity sector"""
    n = hamiltonian.n_qubits
    matrix = hamiltonian.matrix()
    s = np.real(np.diag(parity_operator(n).to_matrix()))
    if np.linalg.norm(matrix * s[None, :] - s[:, None] * matrix) > 1e-10:
        raise ValueError("Hamiltonian does not conserve Z parity")
    indices = np.flatnonzero(s == parity)
    energies, vectors = np.linalg.eigh(matrix[np.ix_(indices, indices)])
    state = np.zeros(2 ** n, dtype=complex)
    state[indices] = vectors[:, 0]
    return float(energies[0]), state


def generator_support(n_qubits: int, use_z2: bool = True, use_time_reversal: bool = True) -> List[PauliString]:
    """
    Allowed QITE generators

    Args:
        n_qubits: Register width
        use_z2: Keep only Paulis commuting with Z...Z
        use_time_reversal: Keep only Paulis with an odd number of Y

    Returns:
        Generators in basis order
    """
    parity = parity_operator(n_qubits)
    return [
        p for p in non_identity_paulis(n_qubits)
        if (not use_z2 or commutes(p, parity)) and (not use_time_reversal or p.y_count() % 2 == 1)
    ]


def mirror(pauli: PauliString) -> PauliString:
    """Pauli string of the reversed chain (qubit i -> n - 1 - i)"""
    return PauliString.from_symbols(pauli.symbols[::-1], pauli.phase)


def reflection_orbits(generators: Sequence[PauliString]) -> List[Tuple[int, ...]]:
    """
    Group generators into mirror-image pairs whose coefficients are tied

    Args:
        generators: Generator Paulis, closed under mirror()

    Returns:
        Index tuples into `generators`, one per free coefficient
    """
    index = {p: i for i, p in enumerate(generators)}
    orbits, seen = [], set()
    for i, pauli in enumerate(generators):
        if i in seen:
            continue
        image = mirror(pauli)
        if image not in index:
            raise ValueError(f"Generator set is not closed under reflection: {image.label} missing")
        orbit = tuple(sorted({i, index[image]}))
        seen.update(orbit)
        orbits.append(orbit)
    return orbits


def group_settings(paulis: Sequence[PauliString]) -> List[PauliString]:
    """Greedy qubit-wise grouping into measurement settings, heaviest Paulis first"""
    settings: List[List[str]] = []
    for pauli in sorted(paulis, key=lambda p: (-p.weight(), p.label)):
        for setting in settings:
            if all(a == 'I' or b == 'I' or a == b for a, b in zip(pauli.symbols, setting)):
                for q, symbol in enumerate(pauli.symbols):
                    if symbol != 'I':
                        setting[q] = symbol
                break
        else:
            settings.append(list(pauli.symbols))
    return [PauliString.from_symbols(''.join(s)) for s in settings]


@dataclass
class StateSupport:
    """Measured Paulis, partner relations and symmetry-forced zeros of a symmetric state"""

    n_qubits: int
    parity: int
    measured: Tuple[PauliString, ...]
    partners: Dict[PauliString, Tuple[PauliString, float]] = field(default_factory=dict)
    forced_zero: frozenset = frozenset()

    @property
    def free_parameter_count(self) -> int:
        return len(self.measured)

    def settings(self) -> List[PauliString]:
        return group_settings(self.measured)

    def complete(self, measured_values: Mapping[PauliString, float]) -> ExpectationSet:
        """Expand measured values into a full expectation set"""
        missing = [p.label for p in self.measured if p not in measured_values]
        if missing:
            raise QiteSystemError(f"Missing measured expectations: {missing}")
        values = {p: float(measured_values[p]) for p in self.measured}
        for derived, (representative, factor) in self.partners.items():
            values[derived] = factor * values[representative]
        return ExpectationSet.from_measurements(self.n_qubits, values, self.forced_zero, self.partners.keys())


def state_support(n_qubits: int, use_z2: bool = True, use_time_reversal: bool = True,
                  parity: int = 1, use_reflection: bool = False) -> StateSupport:
    """
    Support of a state in the Z...Z = parity sector with real amplitudes

    Args:
        n_qubits: Register width
        use_z2: Apply the parity filter and partner relations <S P> = s <P>
        use_time_reversal: Force Paulis with an odd number of Y to zero
        parity: Sector s in {+1, -1}
        use_reflection: Derive <mirror(P)> = <P> for a reflection-symmetric state

    Returns:
        StateSupport
    """
    if parity not in (1, -1):
        raise ValueError(f"Parity must be +1 or -1, got {parity}")
    s_op = parity_operator(n_qubits)
    forced = set()
    kept = []
    for p in non_identity_paulis(n_qubits):
        if (use_time_reversal and p.y_count() % 2 == 1) or (use_z2 and not commutes(p, s_op)):
            forced.add(p)
        else:
            kept.append(p)

    measured: List[PauliString] = []
    partners: Dict[PauliString, Tuple[PauliString, float]] = {}
    assigned = set()
    for p in kept:
        if p in assigned:
            continue
        measured.append(p)
        assigned.add(p)
        images = []
        if use_reflection:
            images.append((mirror(p), 1.0))
        if use_z2 and p != s_op:
            product = pauli_mul(s_op, p)
            factor = (1.0 if product.phase == 0 else -1.0) * parity
            images.append((product.unsigned(), factor))
            if use_reflection:
                images.append((mirror(product.unsigned()), factor))
        for image, factor in images:
            if image in assigned or image in forced:
                continue
            partners[image] = (p, factor)
            assigned.add(image)
    return StateSupport(n_qubits, parity, tuple(measured), partners, frozenset(forced))


def _expectation_of(expectations: ExpectationSet, pauli: PauliString) -> complex:
    try:
        return expectations.value(pauli)
    except KeyError as e:
        raise QiteSystemError(f"QITE system needs an expectation that is not available: {e}")


def step_norm(expectations: ExpectationSet, hamiltonian: Hamiltonian, dtau: float) -> float:
    """
    Second-order estimate of <exp(-2 dtau H)>, the squared norm of the unnormalized step

    Args:
        expectations: Expectations of the current state
        hamiltonian: Hamiltonian
        dtau: Imaginary-time step

    Returns:
        1 - 2 dtau <H> + 2 dtau^2 <H^2>, never below NORM_FLOOR
    """
    terms = hamiltonian.terms.items()
    energy = sum(c * np.real(_expectation_of(expectations, p)) for p, c in terms)
    second_moment = sum(
        ca * cb * np.real(_expectation_of(expectations, pauli_mul(pa, pb)))
        for pa, ca in terms for pb, cb in terms
    )
    return float(max(1 - 2 * dtau * energy + 2 * dtau ** 2 * second_moment, NORM_FLOOR))


def qite_step(expectations: ExpectationSet, hamiltonian: Hamiltonian, dtau: float, ridge: float,
              generators: Sequence[PauliString], use_reflection: bool = False) -> GeneratorSet:
    """
    Solve (S + ridge I) a = b for one imaginary-time step

    Args:
        expectations: Expectations of the current state over its full support
        hamiltonian: Hamiltonian
        dtau: Imaginary-time step
        ridge: Ridge strength (0 disables regularization)
        generators: Allowed generator Paulis
        use_reflection: Tie the coefficients of mirror-image generators

    Returns:
        GeneratorSet whose exp(-i sum a_P P) approximates the normalized exp(-dtau H)
    """
    if dtau <= 0:
        raise ValueError(f"dtau must be positive, got {dtau}")
    if ridge < 0:
        raise ValueError(f"ridge must be non-negative, got {ridge}")
    generators = tuple(generators)
    size = len(generators)
    norm = step_norm(expectations, hamiltonian, dtau)

    s_matrix = np.zeros((size, size))
    b_vector = np.zeros(size)
    for i, pi in enumerate(generators):
        for j, pj in enumerate(generators):
            s_matrix[i, j] = np.real(_expectation_of(expectations, pauli_mul(pi, pj)))
        cross = sum(c * _expectation_of(expectations, pauli_mul(q, pi)) for q, c in hamiltonian.terms.items())
        b_vector[i] = -np.imag(cross) / np.sqrt(norm)

    # columns of `tie` span the coefficient vectors with a_P = a_mirror(P)
    if use_reflection:
        orbits = reflection_orbits(generators)
        tie = np.zeros((size, len(orbits)))
        for k, orbit in enumerate(orbits):
            tie[list(orbit), k] = 1.0
    else:
        tie = np.eye(size)
    reduced_s = tie.T @ s_matrix @ tie
    reduced_b = tie.T @ b_vector

    if ridge == 0 and np.linalg.cond(reduced_s) > COND_LIMIT:
        raise QiteSystemError("QITE system is singular; use a positive ridge")
    solution = tie @ np.linalg.solve(reduced_s + ridge * np.eye(tie.shape[1]), reduced_b)
    return GeneratorSet(generators, dtau * solution)


def initial_bitstring(n_qubits: int, parity: int, symmetric: bool = False) -> str:
    """
    Computational basis state with the requested Z...Z parity

    Args:
        n_qubits: Register width
        parity: +1 gives |0...0>; -1 flips one qubit
        symmetric: Flip the middle qubit so the state is its own mirror image

    Returns:
        Bitstring, qubit 0 first
    """
    if parity == 1:
        return '0' * n_qubits
    if not symmetric:
        return '1' + '0' * (n_qubits - 1)
    if n_qubits % 2 == 0:
        raise ValueError(f"No mirror-symmetric basis state of odd parity on {n_qubits} qubits")
    half = '0' * (n_qubits // 2)
    return half + '1' + half


def tilted_state_circuit(n_qubits: int, tilt: float = SHIFT_TILT) -> Circuit:
    """Ry(tilt) on qubit 0 of |0...0>: real amplitudes in both parity sectors"""
    gates = [ry(tilt)] + [IDENTITY_2] * (n_qubits - 1)
    return Circuit(n_qubits, (EasyCycle.from_unitaries(gates),))


def magnetization(expectations: ExpectationSet) -> float:
    """Mean single-qubit Z expectation"""
    n = expectations.n_qubits
    return float(np.mean([np.real(expectations.value(PauliString.single(n, i, 'Z'))) for i in range(n)]))


@dataclass
class QiteConfig:
    """Parameters of one QITE trajectory"""

    n_qubits: int = 3
    coupling: float = 1.0
    field_strength: float = 1.0
    dtau: float = 0.15
    n_steps: int = 30
    ridge: float = 1e-3
    mitigation: str = 'none'
    rc_randomizations: int = 0
    shots: int = 0
    initial_parity: Union[int, str] = 'auto'
    seed: int = 0
    use_z2: bool = True
    use_time_reversal: bool = True
    use_reflection: bool = False
    summary_window: int = 10
    label: str = 'qite'

    def __post_init__(self):
        if self.dtau <= 0:
            raise ValueError(f"dtau must be positive, got {self.dtau}")
        if self.n_steps < 1:
            raise ValueError(f"n_steps must be at least 1, got {self.n_steps}")
        if self.mitigation not in MITIGATION_MODES:
            raise ValueError(f"Unknown mitigation mode '{self.mitigation}'; expected one of {MITIGATION_MODES}")
        if self.initial_parity not in (1, -1, 'auto'):
            raise ValueError(f"initial_parity must be 1, -1 or 'auto', got {self.initial_parity}")
        if self.rc_randomizations < 0 or self.shots < 0:
            raise ValueError("rc_randomizations and shots must be non-negative")
        if self.rc_randomizations > 0 and self.shots == 0:
            raise ValueError("Randomized compiling needs shots > 0")

    @classmethod
    def from_config(cls, config: Optional[Dict] = None, experiment: Optional[str] = None, **overrides) -> 'QiteConfig':
        """
        Build from the `qite` config section

        Args:
            config: Full configuration dict
            experiment: Optional key in qite.experiments whose values override the shared defaults
            overrides: Final keyword overrides

        Returns:
            QiteConfig
        """
        section = dict((config or {}).get('qite', {}))
        experiments = section.pop('experiments', {})
        values = {k: v for k, v in section.items() if k in cls.__dataclass_fields__}
        if experiment is not None:
            if experiment not in experiments:
                raise ValueError(f"Unknown QITE experiment '{experiment}'")
            values.update({k: v for k, v in experiments[experiment].items() if k in cls.__dataclass_fields__})
            values.setdefault('label', experiment)
        values.update(overrides)
        return cls(**values)


@dataclass
class QiteStepRecord:
    """Measured quantities at one QITE step"""

    step: int
    energy: float
    rel_error: float
    infidelity: float
    magnetization: float
    cz_count: int
    bloch_length: Optional[float]
    mitigation_refused: bool
    mcweeny_failed: bool
    step_fidelity: float
    step_cz_count: Optional[int]
    coefficients: Dict[str, float]

    def to_row(self) -> Dict:
        row = asdict(self)
        row['coefficients'] = json.dumps(self.coefficients, sort_keys=True)
        return row


@dataclass
class QiteTrajectory:
    """Per-step records of one QITE run against its oracle target"""

    config: QiteConfig
    target_energy: float
    records: List[QiteStepRecord] = field(default_factory=list)
    method: str = 'ground'

    def summary(self, window: Optional[int] = None) -> Dict:
        """Mean and std over the last `window` steps"""
        window = window or self.config.summary_window
        tail = self.records[-window:]
        summary = {'label': self.config.label, 'method': self.method, 'window': len(tail),
                   'target_energy': self.target_energy}
        for key in ('energy', 'rel_error', 'infidelity', 'magnetization'):
            values = np.array([getattr(r, key) for r in tail])
            summary[f'{key}_mean'] = float(values.mean())
            summary[f'{key}_std'] = float(values.std())
        summary['refused_steps'] = sum(r.mitigation_refused for r in self.records)
        return summary

    def to_rows(self) -> List[Dict]:
        return [r.to_row() for r in self.records]

    def save_csv(self, path: Path):
        rows = self.to_rows()
        with open(path, 'w', newline='') as f:
            writer = csv.DictWriter(f, fieldnames=list(rows[0].keys()))
            writer.writeheader()
            writer.writerows(rows)


class QiteRunner:
    """Runs QITE trajectories on a simulator backend"""

    def __init__(self, backend: Optional[SimulatorBackend] = None, config: Optional[Dict] = None):
        """
        Initialize runner

        Args:
            backend: Simulator backend (ideal when omitted)
            config: Configuration dict with a qite section (synthesis settings)
        """
        self.backend = backend or SimulatorBackend()
        self.config = config or {}
        qite_settings = self.config.get('qite', {})
        self.exact_ridge = float(qite_settings.get('exact_ridge', 1e-8))
        self.trotter_tolerance = float(qite_settings.get('trotter_tolerance', 1e-3))
        self.cz_cap = int(qite_settings.get('cz_cap', 40))

    def qite_run(self, cfg: QiteConfig) -> QiteTrajectory:
        """
        Ground-state QITE trajectory

        Args:
            cfg: Trajectory parameters; the initial parity must match the ground sector

        Returns:
            QiteTrajectory
        """
        hamiltonian = tfim(cfg.n_qubits, cfg.coupling, cfg.field_strength)
        oracle = exact_ground(hamiltonian)
        parity = oracle.ground_parity if cfg.initial_parity == 'auto' else int(cfg.initial_parity)
        if cfg.use_z2 and parity != oracle.ground_parity:
            logger.error(f"Initial parity {parity} does not match ground-state parity {oracle.ground_parity}")
            raise ValueError("Initial parity excludes the ground state; use excited_run for the other sector")
        prep = basis_state_circuit(initial_bitstring(cfg.n_qubits, parity, cfg.use_reflection))
        return self._run(cfg, hamiltonian, prep, parity, oracle.ground_energy, oracle.ground_state, 'ground')

    def excited_run(self, cfg: QiteConfig, method: str = 'parity', alpha: Optional[float] = None) -> QiteTrajectory:
        """
        First-excited-state QITE trajectory

        Args:
            cfg: Trajectory parameters
            method: 'parity' (start in the other symmetry sector) or 'shift' (H + alpha |GS><GS|)
            alpha: Shift strength, default 10 (E1 - E0); 0 reduces to the ground-state run

        Returns:
            QiteTrajectory targeting the first excited state

        The shift method runs without the parity filter from a tilted product state
        that overlaps both the ground and the first excited state, so only the
        shift keeps the trajectory out of the ground state.
        """
        if method not in EXCITED_METHODS:
            raise ValueError(f"Unknown excited-state method '{method}'")
        hamiltonian = tfim(cfg.n_qubits, cfg.coupling, cfg.field_strength)
        oracle = exact_ground(hamiltonian)
        gap = oracle.excited_energy - oracle.ground_energy

        if method == 'parity':
            parity = -oracle.ground_parity
            energy, state = sector_ground(hamiltonian, parity)
            prep = basis_state_circuit(initial_bitstring(cfg.n_qubits, parity, cfg.use_reflection))
            return self._run(cfg, hamiltonian, prep, parity, energy, state, 'excited_parity')

        if alpha is None:
            alpha = 10 * gap
        if alpha == 0:
            return self.qite_run(cfg)
        if alpha <= gap:
            raise ValueError(f"Shift alpha={alpha} must exceed the gap {gap:.6f}")
        ground = oracle.ground_state
        shifted = Hamiltonian.from_matrix(hamiltonian.matrix() + alpha * np.outer(ground, ground.conj()))
        if cfg.use_z2 or cfg.use_reflection:
            logger.info("Shift method ignores the parity and reflection filters")
            cfg = replace(cfg, use_z2=False, use_reflection=False)
        logger.info(f"Shift method: alpha={alpha:.4f}, {len(shifted.terms)} Pauli terms")
        return self._run(cfg, shifted, tilted_state_circuit(cfg.n_qubits), oracle.excited_parity,
                         oracle.excited_energy, oracle.excited_state, 'excited_shift')

    def _measure(self, cfg: QiteConfig, circuit, support: StateSupport, step: int) -> Dict[PauliString, float]:
        if cfg.shots == 0:
            state = self.backend.final_state(circuit)
            return {p: expectation(state, p) for p in support.measured}

        sums: Dict[PauliString, List[float]] = {p: [] for p in support.measured}
        for j, setting in enumerate(support.settings()):
            seed = derive_seed(cfg.seed, step, j)
            if cfg.rc_randomizations > 0:
                plan = RcPlan.create(circuit, cfg.rc_randomizations, cfg.shots, seed)
                records = rc_records(plan, setting, self.backend)
            else:
                records = [self.backend.run(circuit, setting, cfg.shots, task_rng(seed, 0))]
            for pauli in support.measured:
                if is_compatible(pauli, setting):
                    sums[pauli].append(np.mean([estimate_expectation(r, pauli) for r in records]))
        return {p: float(np.mean(v)) for p, v in sums.items()}

    def _mitigate(self, cfg: QiteConfig, expectations: ExpectationSet,
                  support: StateSupport) -> Tuple[ExpectationSet, bool, bool]:
        if cfg.mitigation == 'none':
            return expectations, False, False
        try:
            mitigated = rescale(expectations)
        except MitigationRefused as e:
            logger.warning(f"⚠️ Rescaling refused: {e}")
            return expectations, True, False
        if cfg.mitigation == 'rescale':
            return mitigated, False, False
        try:
            pure = mcweeny(tomography(mitigated.as_mapping(), cfg.n_qubits))
        except McWeenyError as e:
            logger.warning(f"⚠️ McWeeny purification failed: {e}")
            return mitigated, False, True
        values = ExpectationSet.from_state(pure, support.forced_zero).values
        return mitigated.with_values(values), False, False

    def _run(self, cfg: QiteConfig, hamiltonian: Hamiltonian, prep: Circuit, parity: int, target_energy: float,
             target_state: np.ndarray, method: str) -> QiteTrajectory:
        n = cfg.n_qubits
        initial = net_unitary(prep)[:, 0]
        if abs(np.vdot(target_state, initial)) ** 2 < 1e-10:
            raise ValueError(f"Initial state {prep.to_text()} has no overlap with the target state")

        generators = generator_support(n, cfg.use_z2, cfg.use_time_reversal)
        support = state_support(n, cfg.use_z2, cfg.use_time_reversal, parity, cfg.use_reflection)
        target = ExpectationSet.from_state(DensityMatrix.from_statevector(target_state))
        ridge = self.exact_ridge if cfg.shots == 0 and cfg.mitigation == 'none' else cfg.ridge
        h_matrix = hamiltonian.matrix()
        imaginary_step = expm(-cfg.dtau * h_matrix)

        logger.info(f"Starting QITE '{cfg.label}' ({method}): n={n}, J={cfg.coupling}, h={cfg.field_strength}, "
                    f"dtau={cfg.dtau}, steps={cfg.n_steps}, mitigation={cfg.mitigation}, "
                    f"RC={cfg.rc_randomizations}, shots={cfg.shots}, reflection={cfg.use_reflection}")

        trajectory = QiteTrajectory(cfg, target_energy, method=method)
        accumulated = np.eye(2 ** n, dtype=complex)
        for step in range(cfg.n_steps):
            circuit = prep.then(compile_unitary(accumulated))
            measured = self._measure(cfg, circuit, support, step)
            expectations = support.complete(measured)
            mitigated, refused, mcweeny_failed = self._mitigate(cfg, expectations, support)

            energy = hamiltonian.energy(mitigated)
            try:
                length = bloch_length(expectations)
            except MitigationRefused:
                length = 0.0

            generator_set = qite_step(mitigated, hamiltonian, cfg.dtau, ridge, generators, cfg.use_reflection)
            current = accumulated @ initial
            exact_next = imaginary_step @ current
            exact_next /= np.linalg.norm(exact_next)
            step_unitary = generator_set.unitary()
            step_fidelity = float(abs(np.vdot(exact_next, step_unitary @ current)) ** 2)
            try:
                step_cz = synthesize(generator_set, self.trotter_tolerance, self.cz_cap).cz_count()
            except SynthesisError as e:
                logger.debug(f"Step {step}: product-formula synthesis unavailable ({e})")
                step_cz = None

            trajectory.records.append(QiteStepRecord(
                step=step,
                energy=energy,
                rel_error=abs(energy - target_energy) / abs(target_energy),
                infidelity=1 - fidelity_from_expectations(mitigated, target),
                magnetization=magnetization(mitigated),
                cz_count=circuit.cz_count(),
                bloch_length=length,
                mitigation_refused=refused,
                mcweeny_failed=mcweeny_failed,
                step_fidelity=step_fidelity,
                step_cz_count=step_cz,
                coefficients=generator_set.as_dict(),
            ))
            logger.debug(f"Step {step}: E={energy:.6f}, rel_error={trajectory.records[-1].rel_error:.2e}, "
                         f"CZs={circuit.cz_count()}")
            accumulated = step_unitary @ accumulated

        summary = trajectory.summary()
        logger.info(f"✅ QITE '{cfg.label}' ({method}) done: rel_error={summary['rel_error_mean']:.4%}, "
                    f"infidelity={summary['infidelity_mean']:.4%}")
        return trajectory


def qite_run(cfg: QiteConfig, backend: Optional[SimulatorBackend] = None) -> QiteTrajectory:
    return QiteRunner(backend).qite_run(cfg)


def excited_run(cfg: QiteConfig, backend: Optional[SimulatorBackend] = None, method: str = 'parity',
                alpha: Optional[float] = None) -> QiteTrajectory:
    return QiteRunner(backend).excited_run(cfg, method, alpha)
