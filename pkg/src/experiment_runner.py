"""
Experiment Runner
Runs the benchmark, mitigation and QITE experiments and writes CSV/JSON results
"""

import json
import logging
import time
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from src.circuit import HardCycle, random_kak_circuit
from src.cycle_benchmarking import CycleBenchmark, effective_lambda, predict_fidelity
from src.mitigation import (
    ExpectationSet,
    LENGTH_FLOOR,
    MitigationRefused,
    angle_error,
    bloch_length,
    length_angle_fidelity,
    rescale,
)
from src.noise_model import NoiseModel, cycle_signatures
from src.pauli import PauliString, non_identity_paulis
from src.qite import QiteConfig, QiteRunner, exact_ground, magnetization, tfim
from src.randomized_compiling import RcPlan, rc_estimate, rc_records, rc_variance
from src.run_manifest import RunManifest, write_csv
from src.seeding import derive_seed, task_rng
from src.simulator import (
    DensityMatrix,
    SimulatorBackend,
    apply_circuit,
    estimate_expectation,
    fidelity,
    is_compatible,
    tomography,
)

logger = logging.getLogger(__name__)

DEFAULT_SEED = 1234

DEFAULT_CB_CYCLES = [
    {'name': 'cz_01', 'n_qubits': 2, 'pairs': [[0, 1]]},
    {'name': 'cz_01_idle_2', 'n_qubits': 3, 'pairs': [[0, 1]]},
    {'name': 'cz_12_idle_0', 'n_qubits': 3, 'pairs': [[1, 2]]},
]


def full_settings(n_qubits: int) -> List[PauliString]:
    """The 3^n settings with a non-identity Pauli on every qubit"""
    return [p for p in non_identity_paulis(n_qubits) if p.weight() == n_qubits]


def _binned_mean_abs_error(ideal: np.ndarray, measured: np.ndarray, n_bins: int) -> List[Optional[float]]:
    edges = np.linspace(-1, 1, n_bins + 1)
    indices = np.clip(np.digitize(ideal, edges) - 1, 0, n_bins - 1)
    means = []
    for b in range(n_bins):
        mask = indices == b
        means.append(float(np.mean(np.abs(measured[mask] - ideal[mask]))) if mask.any() else None)
    return means


class ExperimentRunner:
    """Entry point for every experiment; one manifest per run"""

    def __init__(self, config_path: str = "config.json", seed: Optional[int] = None,
                 output_dir: Optional[str] = None, preset: Optional[str] = None,
                 config: Optional[Dict] = None):
        """
        Initialize experiment runner

        Args:
            config_path: Config JSON or a run manifest to replay
            seed: Master seed override
            output_dir: Output directory override
            preset: Noise preset override applied to every experiment
            config: Config dict used instead of reading config_path
        """
        loaded = config if config is not None else self._load_config(config_path)
        replay_seed, replay_preset = None, None
        if 'manifest_schema' in loaded:
            logger.info(f"Replaying run '{loaded.get('experiment')}' from manifest {config_path}")
            replay_seed, replay_preset = loaded.get('seed'), loaded.get('preset')
            loaded = loaded.get('config', {})
        self.config = loaded
        simulation = self.config.get('simulation', {})

        self.seed = int(seed if seed is not None else replay_seed if replay_seed is not None
                        else simulation.get('seed', DEFAULT_SEED))
        self.preset = preset or replay_preset
        self.output_dir = Path(output_dir or simulation.get('output_dir', 'results'))

    def _load_config(self, config_path: str) -> Dict:
        """Load configuration from JSON file"""
        try:
            with open(config_path, 'r') as f:
                return json.load(f)
        except FileNotFoundError:
            logger.warning(f"Config file not found: {config_path}. Using defaults.")
            return {}
        except json.JSONDecodeError as e:
            logger.error(f"Invalid JSON in config file: {e}")
            return {}

    def _preset_name(self, section: Dict) -> str:
        return (self.preset or section.get('preset')
                or self.config.get('simulation', {}).get('default_preset', 'device_like_cz'))

    def _noise(self, section: Dict) -> NoiseModel:
        return NoiseModel.from_config(self.config, self._preset_name(section))

    def _start(self, experiment: str, section: Dict) -> RunManifest:
        self.output_dir.mkdir(parents=True, exist_ok=True)
        logger.info(f"Starting {experiment} (seed={self.seed}, preset={self._preset_name(section)})")
        return RunManifest(experiment, self.config, self.seed, self._preset_name(section))

    def _finish(self, manifest: RunManifest, started: float) -> Path:
        manifest.finish(time.time() - started)
        path = manifest.save(self.output_dir / f"manifest_{manifest.experiment}.json")
        logger.info(f"✅ {manifest.experiment} finished in {manifest.elapsed_seconds:.1f}s; manifest {path}")
        return path

    def _write(self, manifest: RunManifest, name: str, rows: Sequence[Dict]) -> Path:
        path = write_csv(self.output_dir / name, rows)
        manifest.add_output(path)
        return path

    def _measure_all(self, circuit, n_randomizations: int, shots: int, backend: SimulatorBackend,
                     seed: int, manifest: RunManifest, task: Dict) -> Dict[PauliString, float]:
        """RC estimates of every non-identity Pauli from the full settings, averaged over covering settings"""
        n = circuit.n_qubits
        collected: Dict[PauliString, List[float]] = {p: [] for p in non_identity_paulis(n)}
        for j, setting in enumerate(full_settings(n)):
            plan = RcPlan.create(circuit, n_randomizations, shots, derive_seed(seed, j))
            manifest.add_rc_plan({**task, 'setting': setting.label}, plan.to_dict())
            records = rc_records(plan, setting, backend)
            for pauli in collected:
                if is_compatible(pauli, setting):
                    collected[pauli].append(np.mean([estimate_expectation(r, pauli) for r in records]))
        return {p: float(np.mean(v)) for p, v in collected.items()}

    def run_vshape(self) -> Dict:
        """
        Measured vs ideal expectations of random 2-qubit circuits for a grid of randomization counts

        Returns:
            Summary keyed by randomization count
        """
        section = self.config.get('vshape', {})
        grid = section.get('randomizations', [1, 2, 4, 8, 16, 20])
        total_shots = int(section.get('total_shots', 5000))
        n_unitaries = int(section.get('n_unitaries', 30))
        blocks = int(section.get('kak_blocks', 2))
        n_bins = int(section.get('n_bins', 8))
        floor = float(section.get('rescale_floor', LENGTH_FLOOR))
        manifest, started = self._start('vshape', section), time.time()
        noise = self._noise(section)
        backend = SimulatorBackend(noise)

        circuits = [random_kak_circuit(blocks, task_rng(self.seed, 0, u)) for u in range(n_unitaries)]
        predicted = self._predicted_lambda(noise, circuits[0])
        rows, summary_rows = [], []
        for m in grid:
            shots = total_shots // m
            ideal_all, measured_all, rescaled_all = [], [], []
            refused = 0
            for u, circuit in enumerate(circuits):
                ideal = ExpectationSet.from_state(apply_circuit(DensityMatrix.zero_state(2), circuit))
                measured = self._measure_all(circuit, m, shots, backend, derive_seed(self.seed, 1, u, m),
                                             manifest, {'unitary': u, 'randomizations': m})
                measured_set = ExpectationSet.from_measurements(2, measured)
                try:
                    rescaled, unmitigated = rescale(measured_set, floor), False
                except MitigationRefused as e:
                    logger.warning(f"⚠️ V-shape M={m}, unitary {u}: rescaling refused ({e}); keeping raw values")
                    rescaled, unmitigated = measured_set, True
                    refused += 1
                for pauli in non_identity_paulis(2):
                    rows.append({
                        'unitary': u,
                        'randomizations': m,
                        'shots_per_randomization': shots,
                        'pauli': pauli.label,
                        'ideal': ideal.values[pauli],
                        'measured': measured_set.values[pauli],
                        'rescaled': rescaled.values[pauli],
                        'rescale_refused': unmitigated,
                    })
                    ideal_all.append(ideal.values[pauli])
                    measured_all.append(measured_set.values[pauli])
                    rescaled_all.append(rescaled.values[pauli])

            ideal_arr, measured_arr, rescaled_arr = map(np.array, (ideal_all, measured_all, rescaled_all))
            slope = float(np.dot(ideal_arr, measured_arr) / np.dot(ideal_arr, ideal_arr))
            raw_bins = [b for b in _binned_mean_abs_error(ideal_arr, measured_arr, n_bins) if b is not None]
            rescaled_bins = _binned_mean_abs_error(ideal_arr, rescaled_arr, n_bins)
            summary_rows.append({
                'randomizations': m,
                'slope': slope,
                'predicted_slope': predicted,
                'flatness': float(np.std(raw_bins) / np.mean(raw_bins)),
                'mean_abs_error': float(np.mean(np.abs(measured_arr - ideal_arr))),
                'rescaled_mean_abs_error': float(np.mean(np.abs(rescaled_arr - ideal_arr))),
                'rescaled_max_bin_error': max(b for b in rescaled_bins if b is not None),
                'refused_unitaries': refused,
            })
            logger.info(f"V-shape M={m}: slope={slope:.4f} (predicted {predicted:.4f})")

        self._write(manifest, 'vshape.csv', rows)
        self._write(manifest, 'vshape_summary.csv', summary_rows)
        self._finish(manifest, started)
        return {row['randomizations']: row for row in summary_rows}

    def _predicted_lambda(self, noise: NoiseModel, circuit) -> float:
        counts = dict(cycle_signatures(circuit.hard_cycles))
        decays = {c.signature: noise.mean_decay(c) for c in circuit.hard_cycles}
        return effective_lambda(decays, counts)

    def run_depth_sweep(self) -> List[Dict]:
        """
        Fidelity, Bloch length and angle error of random circuits versus CZ depth

        Returns:
            Per-depth summary rows
        """
        section = self.config.get('depth_sweep', {})
        depths = section.get('depths', list(range(0, 31, 3)))
        n_circuits = int(section.get('n_circuits', 10))
        n_randomizations = int(section.get('randomizations', 20))
        shots = int(section.get('shots', 1000))
        for depth in depths:
            if depth % 3:
                raise ValueError(f"Depths must be multiples of 3, got {depth}")
        manifest, started = self._start('depth_sweep', section), time.time()
        noise = self._noise(section)
        backend = SimulatorBackend(noise)
        lambda_bar = noise.mean_decay(HardCycle(2, ((0, 1),)))

        rows, summary_rows = [], []
        for depth in depths:
            per_depth = []
            for c in range(n_circuits):
                circuit = random_kak_circuit(depth // 3, task_rng(self.seed, 2, depth, c))
                ideal_state = apply_circuit(DensityMatrix.zero_state(2), circuit)
                ideal = ExpectationSet.from_state(ideal_state)
                values = self._measure_all(circuit, n_randomizations, shots, backend,
                                           derive_seed(self.seed, 3, depth, c), manifest,
                                           {'depth': depth, 'circuit': c})
                measured = ExpectationSet.from_measurements(2, values)
                length = bloch_length(measured)
                try:
                    cos_epsilon = angle_error(measured, ideal)
                except MitigationRefused:
                    cos_epsilon = float('nan')
                row = {
                    'depth': depth,
                    'circuit': c,
                    'fidelity': fidelity(tomography(measured.as_mapping(), 2), ideal_state),
                    'bloch_length': length,
                    'cos_epsilon': cos_epsilon,
                    'length_angle_fidelity': length_angle_fidelity(length, cos_epsilon, 2),
                    'predicted_fidelity': predict_fidelity(lambda_bar, depth, 2),
                    'predicted_lambda_n': lambda_bar ** depth,
                }
                rows.append(row)
                per_depth.append(row)
            summary = {'depth': depth}
            for key in ('fidelity', 'bloch_length', 'cos_epsilon', 'predicted_fidelity'):
                summary[key] = float(np.mean([r[key] for r in per_depth]))
            summary['gap'] = abs(summary['fidelity'] - summary['predicted_fidelity'])
            summary_rows.append(summary)
            logger.info(f"Depth {depth}: F={summary['fidelity']:.4f} (predicted {summary['predicted_fidelity']:.4f}), "
                        f"L={summary['bloch_length']:.4f}, cos={summary['cos_epsilon']:.4f}")

        self._write(manifest, 'depth_sweep.csv', rows)
        self._write(manifest, 'depth_sweep_summary.csv', summary_rows)
        self._finish(manifest, started)
        return summary_rows

    def run_cb(self) -> Dict[str, Dict]:
        """
        Cycle benchmarking of the configured hard cycles

        Returns:
            JSON summary keyed by cycle name
        """
        section = self.config.get('cycle_benchmarking', {})
        cycles = section.get('cycles', DEFAULT_CB_CYCLES)
        manifest, started = self._start('cb', section), time.time()
        noise = self._noise(section)
        benchmark = CycleBenchmark(SimulatorBackend(noise), self.config)

        summaries = {}
        for i, spec in enumerate(cycles):
            cycle = HardCycle(int(spec['n_qubits']), tuple(tuple(p) for p in spec['pairs']))
            result = benchmark.run(cycle, derive_seed(self.seed, 4, i), sample_size=section.get('sample_size'))
            analytic = noise.analytic_decays(cycle)
            rows = result.to_rows()
            for row in rows:
                row['analytic'] = analytic[PauliString.from_label(row['pauli'])]
            self._write(manifest, f"cb_{spec['name']}.csv", rows)
            summary = result.summary()
            deviations = [abs(v - analytic[p]) for p, v in result.decays.items()]
            summary.update({
                'analytic_lambda_bar': float(np.mean(list(analytic.values()))),
                'max_abs_deviation': float(max(deviations)),
            })
            summaries[spec['name']] = summary

        path = self.output_dir / 'cb_summary.json'
        with open(path, 'w') as f:
            json.dump(summaries, f, indent=2, default=str)
        manifest.add_output(path)
        self._finish(manifest, started)
        return summaries

    def run_qite(self, experiments: Optional[Sequence[str]] = None) -> Dict[str, Dict]:
        """
        QITE trajectories for the configured experiment rows

        Args:
            experiments: Subset of qite.experiments keys (all by default)

        Returns:
            Summary per experiment
        """
        section = self.config.get('qite', {})
        names = list(experiments or section.get('experiments', {}).keys())
        if not names:
            raise ValueError("No QITE experiments configured")
        manifest, started = self._start('qite', section), time.time()
        runner = QiteRunner(SimulatorBackend(self._noise(section)), self.config)

        summaries = {}
        for i, name in enumerate(names):
            cfg = QiteConfig.from_config(self.config, name, seed=derive_seed(self.seed, 5, i))
            trajectory = runner.qite_run(cfg)
            self._write(manifest, f"qite_{name}.csv", trajectory.to_rows())
            summaries[name] = trajectory.summary()

        self._write(manifest, 'qite_summary.csv', list(summaries.values()))
        self._finish(manifest, started)
        return summaries

    def run_phase_diagram(self) -> List[Dict]:
        """
        Ground and first excited energies and magnetization across transverse fields

        Returns:
            One row per field value
        """
        section = self.config.get('phase_diagram', {})
        fields = section.get('h_values', [round(0.2 * k, 1) for k in range(1, 11)])
        coupling = float(section.get('coupling', 1.0))
        overrides = {
            'rc_randomizations': int(section.get('rc_randomizations', 10)),
            'shots': int(section.get('shots', 1024)),
            'mitigation': section.get('mitigation', 'rescale'),
            'summary_window': int(section.get('summary_window', 5)),
        }
        if 'n_steps' in section:
            overrides['n_steps'] = int(section['n_steps'])
        method = section.get('excited_method', 'parity')
        manifest, started = self._start('phase_diagram', section), time.time()
        runner = QiteRunner(SimulatorBackend(self._noise(section)), self.config)

        rows = []
        for i, h in enumerate(fields):
            cfg = QiteConfig.from_config(self.config, coupling=coupling, field_strength=float(h),
                                         seed=derive_seed(self.seed, 6, i), label=f"h={h}", **overrides)
            oracle = exact_ground(tfim(cfg.n_qubits, coupling, float(h)))
            ground = runner.qite_run(cfg).summary()
            excited = runner.excited_run(cfg, method=method).summary()
            exact_mag = magnetization(ExpectationSet.from_state(DensityMatrix.from_statevector(oracle.ground_state)))
            rows.append({
                'h': h,
                'ground_exact': oracle.ground_energy,
                'ground_mean': ground['energy_mean'],
                'ground_std': ground['energy_std'],
                'ground_rel_error': abs(ground['energy_mean'] - oracle.ground_energy) / abs(oracle.ground_energy),
                'excited_exact': excited['target_energy'],
                'excited_mean': excited['energy_mean'],
                'excited_std': excited['energy_std'],
                'excited_rel_error': abs(excited['energy_mean'] - excited['target_energy']) / abs(excited['target_energy']),
                'magnetization_exact': exact_mag,
                'magnetization_mean': ground['magnetization_mean'],
                'magnetization_error': abs(ground['magnetization_mean'] - exact_mag),
            })
            logger.info(f"h={h}: E0 rel error {rows[-1]['ground_rel_error']:.3%}, "
                        f"E1 rel error {rows[-1]['excited_rel_error']:.3%}")

        self._write(manifest, 'phase_diagram.csv', rows)
        self._finish(manifest, started)
        return rows

    def run_variance_study(self) -> List[Dict]:
        """
        Empirical variance of the RC estimator against the shot-noise plus randomization model

        Returns:
            One row per (M, N) grid point
        """
        section = self.config.get('variance_study', {})
        grid_m = section.get('randomizations', [1, 5, 20])
        grid_n = section.get('shots', [10, 100, 1000])
        repetitions = int(section.get('repetitions', 200))
        sigma_samples = int(section.get('sigma_randomizations', 2000))
        observable = PauliString.from_label(section.get('observable', 'ZZ'))
        manifest, started = self._start('variance', section), time.time()
        backend = SimulatorBackend(self._noise(section))

        circuit = random_kak_circuit(int(section.get('kak_blocks', 2)), task_rng(self.seed, 7, 0))
        reference = RcPlan.create(circuit, sigma_samples, 0, derive_seed(self.seed, 7, 1))
        manifest.add_rc_plan({'role': 'sigma_reference'}, reference.to_dict())
        mean_value, exact_values = rc_estimate(reference, observable, backend)
        sigma = float(np.std(exact_values))
        logger.info(f"Variance study: E={mean_value:.4f}, sigma={sigma:.4f} from {sigma_samples} randomizations")

        rows = []
        for m in grid_m:
            for n in grid_n:
                estimates = []
                for r in range(repetitions):
                    plan = RcPlan.create(circuit, m, n, derive_seed(self.seed, 8, m, n, r))
                    manifest.add_rc_plan({'randomizations': m, 'shots': n, 'repetition': r}, plan.to_dict())
                    estimates.append(rc_estimate(plan, observable, backend)[0])
                empirical = float(np.var(estimates, ddof=1))
                model = rc_variance(float(np.clip(mean_value, -1, 1)), sigma, m, n)
                rows.append({
                    'randomizations': m,
                    'shots': n,
                    'empirical_variance': empirical,
                    'model_variance': model,
                    'ratio': model / empirical if empirical > 0 else float('inf'),
                    'plateau': sigma ** 2 / m,
                })
                logger.info(f"M={m}, N={n}: empirical {empirical:.3e}, model {model:.3e}")

        self._write(manifest, 'variance.csv', rows)
        self._finish(manifest, started)
        return rows
