"""
Cycle Benchmarking Module
Pauli-decay estimation for hard cycles with exact Pauli-frame tracking
"""

import csv
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from src.circuit import Circuit, EasyCycle, HardCycle, append_measurement_basis, preparation_rotation
from src.pauli import SINGLE_QUBIT_MATRICES, PauliString, commutes, conjugate_through, non_identity_paulis, random_pauli
from src.seeding import task_rng
from src.simulator import SimulatorBackend, estimate_expectation

logger = logging.getLogger(__name__)

DECAY_CLIP = 1.05
BOUND_FLOOR = 0.005


@dataclass(frozen=True)
class CbSequence:
    """One dressed CB sequence and the signed Pauli it ideally measures as +1"""

    circuit: Circuit
    prepared: PauliString
    measured: PauliString
    length: int
    index: int


@dataclass
class DecayFit:
    """Log-scale fit of A * decay^m"""

    amplitude: Optional[float]
    decay: Optional[float]
    residual: Optional[float]
    decay_stderr: Optional[float] = None
    below_noise_floor: bool = False
    n_points: int = 0


@dataclass
class CbResult:
    """Decays of one hard cycle with per-Pauli fit diagnostics"""

    signature: str
    decays: Dict[PauliString, float]
    fits: Dict[PauliString, DecayFit] = field(default_factory=dict)
    mean: float = 0.0
    std: float = 0.0
    violations: List[PauliString] = field(default_factory=list)

    def to_rows(self) -> List[Dict]:
        rows = []
        for pauli, fit in sorted(self.fits.items(), key=lambda item: item[0].label):
            rows.append({
                'cycle': self.signature,
                'pauli': pauli.label,
                'lambda': fit.decay,
                'amplitude': fit.amplitude,
                'residual': fit.residual,
                'lambda_stderr': fit.decay_stderr,
                'below_noise_floor': fit.below_noise_floor,
            })
        return rows

    def summary(self) -> Dict:
        return {
            'cycle': self.signature,
            'n_decays': len(self.decays),
            'lambda_bar': self.mean,
            'std': self.std,
            'lower_bound': 2 * self.mean - 1,
            'upper_bound': 1.0,
            'violations': [p.label for p in self.violations],
            'below_noise_floor': [p.label for p, f in self.fits.items() if f.below_noise_floor],
        }

    def save(self, csv_path: Path, json_path: Optional[Path] = None):
        """Write the per-Pauli CSV and optionally the JSON summary"""
        rows = self.to_rows()
        with open(csv_path, 'w', newline='') as f:
            writer = csv.DictWriter(f, fieldnames=list(rows[0].keys()))
            writer.writeheader()
            writer.writerows(rows)
        if json_path is not None:
            with open(json_path, 'w') as f:
                json.dump(self.summary(), f, indent=2, default=str)


def _check_lengths(lengths: Sequence[int]):
    for m in lengths:
        if int(m) != m or m <= 0 or m % 4:
            raise ValueError(f"CB lengths must be positive multiples of 4, got {m}")


def _pauli_layer(pauli: PauliString) -> EasyCycle:
    return EasyCycle.from_unitaries([SINGLE_QUBIT_MATRICES[s] for s in pauli.symbols])


def _apply_random_pauli(frame: PauliString, rng: np.random.Generator) -> Tuple[PauliString, EasyCycle]:
    dressing = random_pauli(frame.n_qubits, rng)
    if not commutes(frame, dressing):
        frame = frame.negated()
    return frame, _pauli_layer(dressing)


def cb_sequences(cycle: HardCycle, pauli: PauliString, lengths: Sequence[int], n_random: int,
                 rng: np.random.Generator) -> List[CbSequence]:
    """
    Build dressed CB sequences for one Pauli

    Args:
        cycle: Hard cycle under test
        pauli: Non-identity Pauli whose +1 eigenstate is prepared
        lengths: Repetition counts, positive multiples of 4
        n_random: Dressings per length
        rng: Seeded generator for the dressing Paulis

    Returns:
        Sequences ordered by (length, index)
    """
    if pauli.is_identity:
        raise ValueError("CB needs a non-identity Pauli")
    if pauli.n_qubits != cycle.n_qubits:
        raise ValueError(f"Pauli width {pauli.n_qubits} does not match cycle width {cycle.n_qubits}")
    _check_lengths(lengths)
    prepared = pauli.unsigned()
    prep = EasyCycle.from_unitaries([preparation_rotation(s) for s in prepared.symbols])
    gates = cycle.clifford_gates()
    sequences = []
    for m in lengths:
        for index in range(n_random):
            frame = prepared
            cycles = [prep]
            for _ in range(m):
                frame, layer = _apply_random_pauli(frame, rng)
                cycles.extend([layer, cycle])
                for gate in gates:
                    frame = conjugate_through(frame, gate)
            frame, layer = _apply_random_pauli(frame, rng)
            cycles.append(layer)
            circuit = append_measurement_basis(Circuit.from_cycles(cycle.n_qubits, cycles), frame.unsigned())
            sequences.append(CbSequence(circuit, prepared, frame, int(m), index))
    return sequences


def fit_decay(points: Mapping[int, float]) -> DecayFit:
    """
    Fit A * decay^m to mean signed expectations on a log scale

    Args:
        points: Map length -> mean expectation

    Returns:
        DecayFit; below_noise_floor is set when fewer than two points are positive
    """
    if len(set(points)) < 2:
        raise ValueError(f"Need at least two distinct lengths, got {sorted(points)}")
    positive = sorted((m, v) for m, v in points.items() if v > 0)
    if len(positive) < 2:
        logger.debug(f"Decay below noise floor: {dict(points)}")
        return DecayFit(None, None, None, None, below_noise_floor=True, n_points=len(positive))
    lengths = np.array([m for m, _ in positive], dtype=float)
    logs = np.log([v for _, v in positive])
    fit = stats.linregress(lengths, logs)
    decay = float(min(np.exp(fit.slope), DECAY_CLIP))
    residuals = logs - (fit.intercept + fit.slope * lengths)
    return DecayFit(
        amplitude=float(np.exp(fit.intercept)),
        decay=decay,
        residual=float(np.sqrt(np.mean(residuals ** 2))),
        decay_stderr=float(decay * fit.stderr),
        below_noise_floor=False,
        n_points=len(positive),
    )


def cb_summary(decays: Mapping[PauliString, float],
               stderrs: Optional[Mapping[PauliString, float]] = None) -> Tuple[float, float, List[PauliString]]:
    """
    Mean, population std and bound violations of a decay map

    Args:
        decays: Non-empty map Pauli -> decay
        stderrs: Optional per-Pauli fit standard errors widening the tolerance

    Returns:
        (mean, std, Paulis outside [2 mean - 1, 1] beyond tolerance)
    """
    if not decays:
        raise ValueError("Decay map is empty")
    values = np.array(list(decays.values()))
    mean = float(values.mean())
    std = float(values.std())
    lower = 2 * mean - 1
    violations = []
    for pauli, value in decays.items():
        stderr = (stderrs or {}).get(pauli) or 0.0
        tolerance = max(3 * stderr, BOUND_FLOOR)
        if value < lower - tolerance or value > 1 + tolerance:
            violations.append(pauli)
    return mean, std, violations


def predict_fidelity(lambda_bar: float, n_cycles: int, n_qubits: int) -> float:
    """Fidelity of n_cycles repetitions under depolarizing noise of mean decay lambda_bar"""
    if not 0.0 <= lambda_bar <= 1.0:
        raise ValueError(f"lambda_bar must lie in [0, 1], got {lambda_bar}")
    floor = 1.0 / 2 ** n_qubits
    return floor + (1 - floor) * lambda_bar ** n_cycles


def effective_lambda(cycle_decays: Mapping[str, float], counts: Mapping[str, int]) -> float:
    """Product of lambda_i^n_i over the hard cycles of a circuit"""
    result = 1.0
    for key, count in counts.items():
        if count < 0:
            raise ValueError(f"Cycle count for {key} must be non-negative, got {count}")
        if count:
            result *= cycle_decays[key] ** count
    return result


class CycleBenchmark:
    """Runs CB for hard cycles on a simulator backend"""

    def __init__(self, backend: SimulatorBackend, config: Optional[Dict] = None):
        """
        Initialize cycle benchmark

        Args:
            backend: Backend executing the sequences
            config: Configuration dict with a cycle_benchmarking section
        """
        self.backend = backend
        self.config = config or {}
        cb_settings = self.config.get('cycle_benchmarking', {})

        self.lengths = list(cb_settings.get('lengths', [4, 8, 16, 32]))
        self.n_random = int(cb_settings.get('n_random', 30))
        self.shots = int(cb_settings.get('shots', 100))
        _check_lengths(self.lengths)

    def measure_pauli(self, cycle: HardCycle, pauli: PauliString, seed: int, key: int) -> Dict[int, float]:
        """Mean signed expectation per length for one Pauli"""
        sequences = cb_sequences(cycle, pauli, self.lengths, self.n_random, task_rng(seed, key, 0))
        per_length: Dict[int, List[float]] = {m: [] for m in self.lengths}
        for sequence in sequences:
            if self.shots > 0:
                rng = task_rng(seed, key, 1, sequence.length, sequence.index)
                record = self.backend.measure(sequence.circuit, sequence.measured, self.shots, rng)
                value = estimate_expectation(record, sequence.measured)
            else:
                value = self.backend.exact_expectation(sequence.circuit, sequence.measured)
            per_length[sequence.length].append(value)
        return {m: float(np.mean(v)) for m, v in per_length.items()}

    def run(self, cycle: HardCycle, seed: int, paulis: Optional[Sequence[PauliString]] = None,
            sample_size: Optional[int] = None) -> CbResult:
        """
        Measure Pauli decays of a hard cycle

        Args:
            cycle: Hard cycle under test
            seed: Master seed
            paulis: Paulis to benchmark (all non-identity Paulis by default)
            sample_size: Benchmark a random subset of this size instead

        Returns:
            CbResult
        """
        candidates = list(paulis) if paulis is not None else list(non_identity_paulis(cycle.n_qubits))
        if sample_size is not None and sample_size < len(candidates):
            picks = task_rng(seed, 2 ** 20).choice(len(candidates), size=sample_size, replace=False)
            candidates = [candidates[i] for i in sorted(picks)]
        logger.info(f"Running CB on {cycle.signature}: {len(candidates)} Paulis, lengths {self.lengths}, "
                    f"{self.n_random} x {self.shots} shots")

        decays: Dict[PauliString, float] = {}
        fits: Dict[PauliString, DecayFit] = {}
        for key, pauli in enumerate(candidates):
            fit = fit_decay(self.measure_pauli(cycle, pauli, seed, key))
            fits[pauli] = fit
            if fit.below_noise_floor:
                logger.warning(f"⚠️ Decay of {pauli} on {cycle.signature} is below the noise floor")
            else:
                decays[pauli] = fit.decay

        if not decays:
            raise RuntimeError(f"No Pauli decay on {cycle.signature} could be fitted")
        mean, std, violations = cb_summary(decays, {p: f.decay_stderr for p, f in fits.items()})
        logger.info(f"✅ CB {cycle.signature}: lambda_bar={mean:.4f}, std={std:.4f}, violations={len(violations)}")
        return CbResult(cycle.signature, decays, fits, mean, std, violations)
