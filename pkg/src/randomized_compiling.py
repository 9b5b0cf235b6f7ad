"""
Randomized Compiling Module
Pauli twirling compiled into easy cycles, the RC estimator and its variance model
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Sequence, Tuple

import numpy as np

from src.circuit import Circuit, HardCycle
from src.pauli import (
    PTM,
    SINGLE_QUBIT_MATRICES,
    PauliString,
    conjugate_through,
    pauli_basis,
    pauli_ptm_signs,
    random_pauli,
)
from src.seeding import task_rng
from src.simulator import ShotRecord, SimulatorBackend, estimate_expectation

logger = logging.getLogger(__name__)

TWIRL_STREAM = 0
SHOT_STREAM = 1

Twirls = Tuple[PauliString, ...]


def correction_for(twirl: PauliString, cycle: HardCycle) -> PauliString:
    """Pauli that undoes `twirl` after it passes through the CZ layer (sign dropped)"""
    corrected = twirl
    for gate in cycle.clifford_gates():
        corrected = conjugate_through(corrected, gate)
    return corrected.unsigned()


def _local_gates(pauli: PauliString) -> List[np.ndarray]:
    return [SINGLE_QUBIT_MATRICES[s] for s in pauli.symbols]


def apply_twirls(circuit: Circuit, twirls: Sequence[PauliString]) -> Circuit:
    """
    Compile one twirl Pauli per hard cycle into the neighbouring easy cycles

    Args:
        circuit: Base circuit
        twirls: One Pauli per hard cycle, in time order

    Returns:
        Logically equivalent circuit with the same hard cycles
    """
    hard_cycles = circuit.hard_cycles
    if len(twirls) != len(hard_cycles):
        raise ValueError(f"Expected {len(hard_cycles)} twirls, got {len(twirls)}")
    cycles = list(circuit.cycles)
    for k, (twirl, hard) in enumerate(zip(twirls, hard_cycles)):
        if twirl.is_identity:
            continue
        before, after = 2 * k, 2 * k + 2
        cycles[before] = cycles[before].followed_by(_local_gates(twirl))
        cycles[after] = cycles[after].preceded_by(_local_gates(correction_for(twirl, hard)))
    return Circuit(circuit.n_qubits, tuple(cycles))


def draw_twirls(circuit: Circuit, rng: np.random.Generator) -> Twirls:
    """Independent uniform Paulis (identity included), one per hard cycle"""
    return tuple(random_pauli(circuit.n_qubits, rng) for _ in range(circuit.hard_cycle_count()))


def randomize(circuit: Circuit, rng: np.random.Generator) -> Circuit:
    """One randomized compilation of the circuit"""
    return apply_twirls(circuit, draw_twirls(circuit, rng))


@dataclass
class RcPlan:
    """M randomized compilations of one circuit with N shots each"""

    circuit: Circuit
    n_randomizations: int
    shots_per_randomization: int
    master_seed: int
    twirls: List[Twirls] = field(default_factory=list)

    def __post_init__(self):
        if self.n_randomizations < 1:
            raise ValueError(f"Need at least one randomization, got {self.n_randomizations}")
        if self.shots_per_randomization < 0:
            raise ValueError(f"Shots per randomization must be non-negative, got {self.shots_per_randomization}")
        if len(self.twirls) != self.n_randomizations:
            raise ValueError("One twirl assignment per randomization is required")

    @classmethod
    def create(cls, circuit: Circuit, n_randomizations: int, shots_per_randomization: int,
               master_seed: int, identity_twirls: bool = False) -> 'RcPlan':
        """
        Draw the twirl assignments for every randomization

        Args:
            circuit: Base circuit
            n_randomizations: M
            shots_per_randomization: N (0 requests exact expectations)
            master_seed: Seed from which each randomization's stream is keyed
            identity_twirls: Use identity twirls (bare circuit repeated M times)

        Returns:
            RcPlan
        """
        if identity_twirls:
            identity = PauliString.identity(circuit.n_qubits)
            twirls = [(identity,) * circuit.hard_cycle_count() for _ in range(n_randomizations)]
        else:
            twirls = [draw_twirls(circuit, task_rng(master_seed, m, TWIRL_STREAM)) for m in range(n_randomizations)]
        return cls(circuit, n_randomizations, shots_per_randomization, master_seed, twirls)

    @property
    def total_shots(self) -> int:
        return self.n_randomizations * self.shots_per_randomization

    def circuits(self) -> List[Circuit]:
        return [apply_twirls(self.circuit, t) for t in self.twirls]

    def shot_rng(self, index: int) -> np.random.Generator:
        return task_rng(self.master_seed, index, SHOT_STREAM)

    def to_dict(self) -> Dict:
        return {
            'n_randomizations': self.n_randomizations,
            'shots_per_randomization': self.shots_per_randomization,
            'master_seed': self.master_seed,
            'twirls': [[p.label for p in t] for t in self.twirls],
        }

    @classmethod
    def from_dict(cls, circuit: Circuit, data: Dict) -> 'RcPlan':
        """Rebuild a plan recorded with to_dict() for its base circuit"""
        twirls = [tuple(PauliString.from_label(label) for label in t) for t in data['twirls']]
        for t in twirls:
            if len(t) != circuit.hard_cycle_count():
                raise ValueError(f"Recorded twirls cover {len(t)} hard cycles, circuit has {circuit.hard_cycle_count()}")
        return cls(circuit, int(data['n_randomizations']), int(data['shots_per_randomization']),
                   int(data['master_seed']), twirls)


def rc_records(plan: RcPlan, setting: PauliString, backend: SimulatorBackend) -> List[ShotRecord]:
    """Shot records of every randomized circuit measured in `setting`"""
    if setting.is_identity:
        raise ValueError("Measurement setting must not be the identity")
    if plan.shots_per_randomization == 0:
        raise ValueError("Shot records need shots_per_randomization > 0")
    records = []
    for m, circuit in enumerate(plan.circuits()):
        records.append(backend.run(circuit, setting, plan.shots_per_randomization, plan.shot_rng(m)))
    return records


def rc_estimate(plan: RcPlan, observable: PauliString, backend: SimulatorBackend) -> Tuple[float, List[float]]:
    """
    RC expectation E_RC = mean of the per-randomization estimates

    Args:
        plan: Randomization plan; zero shots gives exact per-randomization values
        observable: Hermitian non-identity Pauli
        backend: Simulator backend

    Returns:
        (E_RC, per-randomization values)
    """
    if observable.is_identity:
        raise ValueError("Observable must not be the identity")
    if plan.shots_per_randomization == 0:
        values = [backend.exact_expectation(c, observable) for c in plan.circuits()]
    else:
        records = rc_records(plan, observable.unsigned(), backend)
        values = [estimate_expectation(r, observable) for r in records]
    return float(np.mean(values)), values


def twirled_ptm(ptm: PTM) -> PTM:
    """
    Exhaustive Pauli-twirl average of a PTM

    Args:
        ptm: PTM of an n <= 2 qubit channel

    Returns:
        Twirled PTM, checked to equal the diagonal of the input
    """
    n = ptm.n_qubits
    if n > 2:
        raise ValueError(f"Exhaustive twirling supports at most 2 qubits, got {n}")
    total = np.zeros_like(ptm.matrix)
    for twirl in pauli_basis(n):
        signs = pauli_ptm_signs(twirl)
        total += signs[:, None] * ptm.matrix * signs[None, :]
    twirled = total / 4 ** n
    error = np.abs(twirled - np.diag(np.diag(ptm.matrix))).max()
    if error > 1e-10:
        raise RuntimeError(f"Twirled PTM deviates from the diagonal by {error:.3e}")
    return PTM(n, twirled)


def rc_variance(expectation_value: float, sigma: float, n_randomizations: int, shots: int) -> float:
    """
    Variance of the RC estimator: shot noise plus spread between randomizations

    Args:
        expectation_value: E, |E| <= 1
        sigma: Standard deviation of the per-randomization exact values
        n_randomizations: M >= 1
        shots: N >= 1 shots per randomization

    Returns:
        (1/M) ((1 - E)(1 + E)/N + ((N - 1)/N) sigma^2)
    """
    if abs(expectation_value) > 1:
        raise ValueError(f"|E| must not exceed 1, got {expectation_value}")
    if sigma < 0:
        raise ValueError(f"sigma must be non-negative, got {sigma}")
    if n_randomizations < 1 or shots < 1:
        raise ValueError(f"M and N must be at least 1, got M={n_randomizations}, N={shots}")
    e = expectation_value
    return ((1 - e) * (1 + e) / shots + (shots - 1) / shots * sigma ** 2) / n_randomizations
