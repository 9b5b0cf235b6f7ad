"""
Noise Model Module
Hard-cycle noise built from coherent Z-type over-rotations and stochastic Pauli channels
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Tuple

import numpy as np

from src.circuit import HardCycle
from src.pauli import (
    PTM,
    Channel,
    PauliString,
    commutes,
    non_identity_paulis,
    parse_pauli_map,
    pauli_basis,
    pauli_mul,
    ptm_of,
)

logger = logging.getLogger(__name__)

DEFAULT_PRESET = 'device_like_cz'

# Default CZ noise: ZZ/Z over-rotations of 0.04/0.02 rad and 1% uniform two-qubit Pauli noise
DEFAULT_NOISE_PRESETS: Dict[str, Dict] = {
    'device_like_cz': {
        'zz_angle': 0.04,
        'z_angle': 0.02,
        'idle_z_angle': 0.01,
        'depolarizing': 0.01,
        'idle_depolarizing': 0.0,
    },
    # Stronger variant tuned so the isolated CZ cycle has mean decay ~0.980 and decay spread ~0.003
    'lambda_980_cz': {
        'zz_angle': 0.11,
        'z_angle': 0.05,
        'idle_z_angle': 0.01,
        'depolarizing': 0.0145,
        'idle_depolarizing': 0.0,
    },
    'coherent_heavy': {
        'zz_angle': 0.25,
        'z_angle': 0.12,
        'idle_z_angle': 0.05,
        'depolarizing': 0.005,
        'idle_depolarizing': 0.0,
    },
    'depolarizing_only': {
        'zz_angle': 0.0,
        'z_angle': 0.0,
        'idle_z_angle': 0.0,
        'depolarizing': 0.02,
        'idle_depolarizing': 0.0,
    },
    'noiseless': {
        'zz_angle': 0.0,
        'z_angle': 0.0,
        'idle_z_angle': 0.0,
        'depolarizing': 0.0,
        'idle_depolarizing': 0.0,
    },
}


class NoiseModelError(KeyError):
    """Raised in strict mode when a hard cycle has no explicit noise entry"""


def convolve_pauli_channels(first: Mapping[PauliString, float],
                            second: Mapping[PauliString, float],
                            n_qubits: int) -> Dict[PauliString, float]:
    """
    Error distribution of two independent Pauli channels applied in sequence

    Args:
        first: Non-identity Pauli probabilities of one channel
        second: Non-identity Pauli probabilities of the other
        n_qubits: Register width

    Returns:
        Non-identity probabilities of the combined channel
    """
    identity = PauliString.identity(n_qubits)
    full_a = dict(first)
    full_a[identity] = 1.0 - sum(first.values())
    full_b = dict(second)
    full_b[identity] = 1.0 - sum(second.values())
    combined: Dict[PauliString, float] = {}
    for pa, qa in full_a.items():
        for pb, qb in full_b.items():
            key = pauli_mul(pa, pb).unsigned()
            combined[key] = combined.get(key, 0.0) + qa * qb
    combined.pop(identity, None)
    return {p: q for p, q in combined.items() if q > 0}


@dataclass(frozen=True)
class ReadoutError:
    """Symmetric-per-qubit bit-flip confusion at measurement"""

    p01: float = 0.0
    p10: float = 0.0

    def __post_init__(self):
        for name, value in (('p01', self.p01), ('p10', self.p10)):
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"Readout probability {name}={value} outside [0, 1]")

    @property
    def confusion_matrix(self) -> np.ndarray:
        """M[read][true] for one qubit"""
        return np.array([[1 - self.p01, self.p10], [self.p01, 1 - self.p10]])

    @property
    def is_trivial(self) -> bool:
        return self.p01 == 0.0 and self.p10 == 0.0

    def apply(self, probabilities: np.ndarray, n_qubits: int) -> np.ndarray:
        """Push a computational-basis distribution through the per-qubit confusion"""
        if self.is_trivial:
            return probabilities
        tensor = probabilities.reshape((2,) * n_qubits)
        m = self.confusion_matrix
        for q in range(n_qubits):
            tensor = np.moveaxis(np.tensordot(m, tensor, axes=([1], [q])), 0, q)
        return tensor.reshape(-1)


@dataclass
class NoiseEntry:
    """Error attached to one hard-cycle signature: coherent unitary, then Pauli channel"""

    n_qubits: int
    coherent: Dict[PauliString, float] = field(default_factory=dict)
    pauli_probabilities: Dict[PauliString, float] = field(default_factory=dict)

    def __post_init__(self):
        total = sum(self.pauli_probabilities.values())
        for pauli, prob in self.pauli_probabilities.items():
            if pauli.n_qubits != self.n_qubits or pauli.is_identity:
                raise ValueError(f"Invalid Pauli {pauli} in noise entry for {self.n_qubits} qubits")
            if not 0.0 <= prob <= 1.0:
                raise ValueError(f"Pauli probability {prob} for {pauli} outside [0, 1]")
        if total > 1.0 + 1e-12:
            raise ValueError(f"Pauli probabilities sum to {total} > 1")
        for pauli in self.coherent:
            if pauli.n_qubits != self.n_qubits:
                raise ValueError(f"Coherent generator {pauli} does not act on {self.n_qubits} qubits")

    @property
    def is_trivial(self) -> bool:
        return not any(self.coherent.values()) and not any(self.pauli_probabilities.values())

    def coherent_unitary(self) -> np.ndarray:
        """Product of exp(-i theta P / 2) over the coherent generators"""
        dim = 2 ** self.n_qubits
        unitary = np.eye(dim, dtype=complex)
        for pauli, theta in self.coherent.items():
            if theta == 0:
                continue
            rotation = np.cos(theta / 2) * np.eye(dim) - 1j * np.sin(theta / 2) * pauli.to_matrix()
            unitary = rotation @ unitary
        return unitary

    def pauli_fidelities(self) -> np.ndarray:
        """Diagonal of the stochastic part's PTM over the full Pauli basis"""
        basis = pauli_basis(self.n_qubits)
        identity_prob = 1.0 - sum(self.pauli_probabilities.values())
        diag = np.full(len(basis), identity_prob)
        for q, prob in self.pauli_probabilities.items():
            diag += prob * np.array([1.0 if commutes(p, q) else -1.0 for p in basis])
        return diag

    def error_ptm(self) -> PTM:
        """PTM of the error channel (Pauli part after coherent part)"""
        coherent = ptm_of(Channel.unitary(self.coherent_unitary()))
        return PTM(self.n_qubits, np.diag(self.pauli_fidelities()) @ coherent.matrix)


class NoiseModel:
    """Per-hard-cycle noise plus optional readout confusion"""

    def __init__(self, preset: Optional[Dict] = None, name: str = 'custom'):
        """
        Initialize noise model

        Args:
            preset: Preset dict with zz_angle, z_angle, idle_z_angle, depolarizing,
                idle_depolarizing, readout, strict and entries fields
            name: Preset name recorded in manifests and logs
        """
        self.preset = dict(preset or {})
        self.name = name
        self.zz_angle = float(self.preset.get('zz_angle', 0.0))
        self.z_angle = float(self.preset.get('z_angle', 0.0))
        self.idle_z_angle = float(self.preset.get('idle_z_angle', 0.0))
        self.depolarizing = float(self.preset.get('depolarizing', 0.0))
        self.idle_depolarizing = float(self.preset.get('idle_depolarizing', 0.0))
        self.strict = bool(self.preset.get('strict', False))

        if not 0.0 <= self.depolarizing <= 1.0 or not 0.0 <= self.idle_depolarizing <= 1.0:
            raise ValueError(f"Depolarizing probabilities must lie in [0, 1] (preset '{name}')")

        readout = self.preset.get('readout')
        self.readout: Optional[ReadoutError] = ReadoutError(**readout) if readout else None

        self.entries: Dict[str, NoiseEntry] = {}
        for signature, spec in (self.preset.get('entries') or {}).items():
            n_qubits = int(signature.rsplit('/n=', 1)[1])
            self.entries[signature] = NoiseEntry(
                n_qubits,
                coherent=parse_pauli_map(spec.get('coherent')),
                pauli_probabilities=parse_pauli_map(spec.get('pauli_probabilities')),
            )

        self._superops: Dict[str, np.ndarray] = {}
        self._decays: Dict[str, Dict[PauliString, float]] = {}

    @classmethod
    def from_config(cls, config: Optional[Dict] = None, preset_name: Optional[str] = None) -> 'NoiseModel':
        """
        Build the named preset from the `noise_presets` config section

        Args:
            config: Full configuration dict
            preset_name: Preset to load; defaults to simulation.default_preset

        Returns:
            NoiseModel
        """
        config = config or {}
        name = preset_name or config.get('simulation', {}).get('default_preset', DEFAULT_PRESET)
        presets = dict(DEFAULT_NOISE_PRESETS)
        presets.update(config.get('noise_presets', {}))
        if name not in presets:
            logger.error(f"Unknown noise preset '{name}'. Available: {sorted(presets)}")
            raise ValueError(f"Unknown noise preset '{name}'")
        logger.debug(f"Loaded noise preset '{name}': {presets[name]}")
        return cls(presets[name], name=name)

    @classmethod
    def noiseless(cls) -> 'NoiseModel':
        return cls(DEFAULT_NOISE_PRESETS['noiseless'], name='noiseless')

    @property
    def is_noiseless(self) -> bool:
        readout_free = self.readout is None or self.readout.is_trivial
        defaults_free = not any((self.zz_angle, self.z_angle, self.idle_z_angle,
                                 self.depolarizing, self.idle_depolarizing))
        return readout_free and defaults_free and all(e.is_trivial for e in self.entries.values())

    def _default_entry(self, cycle: HardCycle) -> NoiseEntry:
        n = cycle.n_qubits
        coherent: Dict[PauliString, float] = {}
        probabilities: Dict[PauliString, float] = {}
        for a, b in cycle.pairs:
            symbols = ['I'] * n
            symbols[a] = symbols[b] = 'Z'
            coherent[PauliString.from_symbols(''.join(symbols))] = self.zz_angle
            coherent[PauliString.single(n, a, 'Z')] = self.z_angle
            coherent[PauliString.single(n, b, 'Z')] = self.z_angle
            if self.depolarizing > 0:
                pair_channel = {}
                for local in non_identity_paulis(2):
                    symbols = ['I'] * n
                    symbols[a], symbols[b] = local.symbols
                    pair_channel[PauliString.from_symbols(''.join(symbols))] = self.depolarizing / 15
                probabilities = convolve_pauli_channels(probabilities, pair_channel, n)
        for q in cycle.idle_qubits:
            coherent[PauliString.single(n, q, 'Z')] = self.idle_z_angle
            if self.idle_depolarizing > 0:
                idle_channel = {PauliString.single(n, q, s): self.idle_depolarizing / 4 for s in 'XYZ'}
                probabilities = convolve_pauli_channels(probabilities, idle_channel, n)
        return NoiseEntry(n, coherent={p: t for p, t in coherent.items() if t}, pauli_probabilities=probabilities)

    def entry(self, cycle: HardCycle) -> NoiseEntry:
        """
        Noise entry for a hard cycle

        Args:
            cycle: Hard cycle to look up by signature

        Returns:
            Explicit entry, or the preset-built default when not in strict mode
        """
        signature = cycle.signature
        if signature in self.entries:
            return self.entries[signature]
        if self.strict:
            logger.error(f"No noise entry for '{signature}' in strict preset '{self.name}'")
            raise NoiseModelError(signature)
        return self._default_entry(cycle)

    def superoperator(self, cycle: HardCycle) -> np.ndarray:
        """Row-major superoperator of the noisy cycle: ideal CZ layer, coherent error, Pauli channel"""
        signature = cycle.signature
        if signature not in self._superops:
            entry = self.entry(cycle)
            v = entry.coherent_unitary() @ cycle.matrix()
            dim = 2 ** cycle.n_qubits
            identity_prob = 1.0 - sum(entry.pauli_probabilities.values())
            pauli_part = identity_prob * np.eye(dim * dim, dtype=complex)
            for pauli, prob in entry.pauli_probabilities.items():
                m = pauli.to_matrix()
                pauli_part += prob * np.kron(m, m.conj())
            self._superops[signature] = pauli_part @ np.kron(v, v.conj())
            logger.debug(f"Cached superoperator for {signature}")
        return self._superops[signature]

    def analytic_decays(self, cycle: HardCycle) -> Dict[PauliString, float]:
        """
        Pauli decays of the twirled per-cycle error

        Args:
            cycle: Hard cycle

        Returns:
            Diagonal PTM entries keyed by non-identity Pauli
        """
        signature = cycle.signature
        if signature not in self._decays:
            self._decays[signature] = self.entry(cycle).error_ptm().decays()
        return dict(self._decays[signature])

    def mean_decay(self, cycle: HardCycle) -> float:
        return float(np.mean(list(self.analytic_decays(cycle).values())))


def cycle_signatures(cycles: List[HardCycle]) -> List[Tuple[str, int]]:
    """(signature, occurrence count) pairs in first-seen order"""
    counts: Dict[str, int] = {}
    for cycle in cycles:
        counts[cycle.signature] = counts.get(cycle.signature, 0) + 1
    return list(counts.items())
