"""
Tests for the experiment runner
Each experiment on a tiny configuration, manifest replay and config fallbacks
"""

import csv
import json
import os
import tempfile
import unittest
import sys
from pathlib import Path

import numpy as np

# Add parent directory to path
sys.path.insert(0, str(Path(__file__).parent.parent))

from src.circuit import random_kak_circuit
from src.experiment_runner import DEFAULT_SEED, ExperimentRunner, full_settings
from src.randomized_compiling import RcPlan
from src.run_manifest import RunManifest
from src.seeding import derive_seed, task_rng

SHIPPED_CONFIG = Path(__file__).parent.parent / 'config.json'


def tiny_config() -> dict:
    return {
        'simulation': {'seed': 77, 'default_preset': 'device_like_cz'},
        'vshape': {'randomizations': [1, 2], 'total_shots': 40, 'n_unitaries': 2, 'kak_blocks': 1, 'n_bins': 4},
        'depth_sweep': {'depths': [0, 3], 'n_circuits': 1, 'randomizations': 2, 'shots': 50},
        'cycle_benchmarking': {
            'preset': 'depolarizing_only', 'lengths': [4, 8], 'n_random': 1, 'shots': 0, 'sample_size': 3,
            'cycles': [{'name': 'cz_01', 'n_qubits': 2, 'pairs': [[0, 1]]}],
        },
        'qite': {
            'n_qubits': 2, 'n_steps': 3, 'summary_window': 2,
            'experiments': {
                'exact': {'mitigation': 'none', 'rc_randomizations': 0, 'shots': 0},
                'sampled': {'mitigation': 'rescale', 'rc_randomizations': 0, 'shots': 50},
            },
        },
        'phase_diagram': {'h_values': [0.5], 'rc_randomizations': 0, 'shots': 0, 'mitigation': 'none',
                          'n_steps': 3, 'summary_window': 2},
        'variance_study': {'randomizations': [1, 2], 'shots': [10], 'repetitions': 5,
                           'sigma_randomizations': 20, 'kak_blocks': 1, 'observable': 'ZZ'},
    }


def read_csv(path: Path) -> list:
    with open(path, 'r', newline='') as f:
        return list(csv.DictReader(f))


class TestExperimentRunner(unittest.TestCase):
    """Tiny end-to-end runs of every experiment"""

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.out = Path(self.tmp.name)
        self.runner = ExperimentRunner(config=tiny_config(), output_dir=str(self.out))

    def tearDown(self):
        self.tmp.cleanup()

    def test_seed_and_preset_resolution(self):
        self.assertEqual(self.runner.seed, 77)
        self.assertEqual(self.runner._preset_name({}), 'device_like_cz')
        self.assertEqual(self.runner._preset_name({'preset': 'coherent_heavy'}), 'coherent_heavy')
        override = ExperimentRunner(config=tiny_config(), seed=5, preset='noiseless', output_dir=str(self.out))
        self.assertEqual(override.seed, 5)
        self.assertEqual(override._preset_name({'preset': 'coherent_heavy'}), 'noiseless')

    def test_full_settings(self):
        self.assertEqual(len(full_settings(2)), 9)
        self.assertEqual(len(full_settings(3)), 27)

    def test_vshape(self):
        summary = self.runner.run_vshape()
        self.assertEqual(sorted(summary), [1, 2])
        rows = read_csv(self.out / 'vshape.csv')
        self.assertEqual(len(rows), 2 * 2 * 15)
        self.assertEqual(rows[0]['shots_per_randomization'], '40')
        for row in summary.values():
            self.assertGreater(row['slope'], 0.5)
            self.assertLessEqual(row['predicted_slope'], 1.0)
        self.assertTrue((self.out / 'manifest_vshape.json').exists())
        self.assertEqual({row['rescale_refused'] for row in rows}, {'False'})

    def test_vshape_manifest_records_rc_plans(self):
        self.runner.run_vshape()
        manifest = RunManifest.load(self.out / 'manifest_vshape.json')
        self.assertEqual(len(manifest.rc_plans), 2 * 2 * 9)
        setting = full_settings(2)[0]
        entry = manifest.find_rc_plan(unitary=1, randomizations=2, setting=setting.label)
        circuit = random_kak_circuit(1, task_rng(77, 0, 1))
        expected = RcPlan.create(circuit, 2, 20, derive_seed(derive_seed(77, 1, 1, 2), 0))
        rebuilt = RcPlan.from_dict(circuit, entry)
        self.assertEqual(rebuilt.twirls, expected.twirls)
        self.assertEqual(rebuilt.shots_per_randomization, 20)

    def test_vshape_keeps_going_when_rescaling_is_refused(self):
        config = tiny_config()
        config['vshape']['rescale_floor'] = 2.0
        summary = ExperimentRunner(config=config, output_dir=str(self.out)).run_vshape()
        for row in summary.values():
            self.assertEqual(row['refused_unitaries'], 2)
            self.assertEqual(row['rescaled_mean_abs_error'], row['mean_abs_error'])
        rows = read_csv(self.out / 'vshape.csv')
        self.assertEqual(len(rows), 2 * 2 * 15)
        for row in rows:
            self.assertEqual(row['rescale_refused'], 'True')
            self.assertEqual(row['rescaled'], row['measured'])

    def test_depth_sweep(self):
        summary = self.runner.run_depth_sweep()
        self.assertEqual([row['depth'] for row in summary], [0, 3])
        self.assertAlmostEqual(summary[0]['predicted_fidelity'], 1.0)
        for row in summary:
            self.assertGreaterEqual(row['fidelity'], 0.0)
            self.assertLessEqual(row['fidelity'], 1.0 + 1e-9)
        self.assertEqual(len(read_csv(self.out / 'depth_sweep.csv')), 2)

    def test_depth_must_be_multiple_of_three(self):
        config = tiny_config()
        config['depth_sweep']['depths'] = [4]
        with self.assertRaises(ValueError):
            ExperimentRunner(config=config, output_dir=str(self.out)).run_depth_sweep()

    def test_cb(self):
        summaries = self.runner.run_cb()
        self.assertIn('cz_01', summaries)
        self.assertEqual(summaries['cz_01']['n_decays'], 3)
        self.assertIn('analytic_lambda_bar', summaries['cz_01'])
        rows = read_csv(self.out / 'cb_cz_01.csv')
        self.assertEqual(len(rows), 3)
        for row in rows:
            self.assertAlmostEqual(float(row['lambda']), float(row['analytic']), places=6)
        with open(self.out / 'cb_summary.json', 'r') as f:
            self.assertIn('cz_01', json.load(f))

    def test_qite(self):
        summaries = self.runner.run_qite(['exact'])
        self.assertEqual(list(summaries), ['exact'])
        self.assertEqual(summaries['exact']['window'], 2)
        self.assertEqual(len(read_csv(self.out / 'qite_exact.csv')), 3)
        self.assertEqual(len(read_csv(self.out / 'qite_summary.csv')), 1)

    def test_qite_without_experiments(self):
        config = tiny_config()
        config['qite'].pop('experiments')
        with self.assertRaises(ValueError):
            ExperimentRunner(config=config, output_dir=str(self.out)).run_qite()

    def test_phase_diagram(self):
        rows = self.runner.run_phase_diagram()
        self.assertEqual(len(rows), 1)
        row = rows[0]
        self.assertLess(row['ground_exact'], row['excited_exact'])
        self.assertGreaterEqual(row['magnetization_error'], 0.0)
        self.assertTrue((self.out / 'phase_diagram.csv').exists())

    def test_variance_study(self):
        rows = self.runner.run_variance_study()
        self.assertEqual([(r['randomizations'], r['shots']) for r in rows], [(1, 10), (2, 10)])
        for row in rows:
            self.assertGreater(row['model_variance'], 0.0)
            self.assertGreaterEqual(row['plateau'], 0.0)

    def test_depth_sweep_and_variance_manifests_record_rc_plans(self):
        self.runner.run_depth_sweep()
        self.runner.run_variance_study()
        sweep = RunManifest.load(self.out / 'manifest_depth_sweep.json')
        self.assertEqual(len(sweep.rc_plans), 2 * 9)
        self.assertIsNotNone(sweep.find_rc_plan(depth=3, circuit=0, setting=full_settings(2)[4].label))
        variance = RunManifest.load(self.out / 'manifest_variance.json')
        self.assertEqual(len(variance.rc_plans), 1 + 2 * 5)
        self.assertEqual(variance.find_rc_plan(role='sigma_reference')['n_randomizations'], 20)
        self.assertEqual(variance.find_rc_plan(randomizations=2, shots=10, repetition=4)['n_randomizations'], 2)


class TestManifestReplay(unittest.TestCase):

    def test_replay_reproduces_results(self):
        with tempfile.TemporaryDirectory() as first, tempfile.TemporaryDirectory() as second:
            original = ExperimentRunner(config=tiny_config(), seed=2024, output_dir=first)
            expected = original.run_qite(['sampled'])
            manifest_path = Path(first) / 'manifest_qite.json'
            with open(manifest_path, 'r') as f:
                manifest = json.load(f)
            self.assertEqual(manifest['seed'], 2024)
            self.assertEqual(manifest['preset'], 'device_like_cz')
            self.assertTrue(any(o.endswith('qite_sampled.csv') for o in manifest['outputs']))

            replay = ExperimentRunner(str(manifest_path), output_dir=second)
            self.assertEqual(replay.seed, 2024)
            self.assertEqual(replay.run_qite(['sampled']), expected)


class TestConfigLoading(unittest.TestCase):

    def test_missing_file_uses_defaults(self):
        with tempfile.TemporaryDirectory() as tmp:
            runner = ExperimentRunner(str(Path(tmp) / 'absent.json'))
        self.assertEqual(runner.config, {})
        self.assertEqual(runner.seed, DEFAULT_SEED)
        self.assertEqual(runner.output_dir, Path('results'))

    def test_invalid_json_uses_defaults(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / 'broken.json'
            path.write_text('{"simulation": ')
            runner = ExperimentRunner(str(path))
        self.assertEqual(runner.config, {})

    def test_shipped_config_loads(self):
        runner = ExperimentRunner(str(SHIPPED_CONFIG))
        self.assertEqual(runner.seed, 1234)
        self.assertEqual(sorted(runner.config['qite']['experiments']), ['exp1', 'exp2', 'exp3', 'exp4', 'exp5'])

    def test_shipped_default_preset(self):
        runner = ExperimentRunner(str(SHIPPED_CONFIG))
        preset = runner.config['noise_presets']['device_like_cz']
        self.assertEqual(runner._preset_name({}), 'device_like_cz')
        self.assertEqual((preset['zz_angle'], preset['z_angle'], preset['idle_z_angle'], preset['depolarizing']),
                         (0.04, 0.02, 0.01, 0.01))
        self.assertIn('lambda_980_cz', runner.config['noise_presets'])


@unittest.skipUnless(os.getenv('RUN_SLOW_TESTS'), "set RUN_SLOW_TESTS=1 for full-size experiment acceptance runs")
class TestShippedExperiments(unittest.TestCase):
    """Full experiments with the shipped config reach their target accuracies"""

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.out = self.tmp.name

    def tearDown(self):
        self.tmp.cleanup()

    def runner(self, **overrides) -> ExperimentRunner:
        return ExperimentRunner(str(SHIPPED_CONFIG), output_dir=self.out, **overrides)

    def test_vshape_slope_and_rescaled_error(self):
        summary = self.runner().run_vshape()
        for m, row in summary.items():
            if m >= 16:
                self.assertLess(abs(row['slope'] - row['predicted_slope']), 0.01, f"M={m}")
                self.assertLess(row['rescaled_max_bin_error'], 0.01, f"M={m}")
        self.assertLess(summary[20]['flatness'], summary[1]['flatness'])

    def test_depth_sweep_tracks_prediction(self):
        rows = self.runner().run_depth_sweep()
        for row in rows:
            if row['depth'] >= 3:
                self.assertLess(row['gap'], 0.02, f"depth {row['depth']}")
        deepest = rows[-1]
        self.assertLess(1 - deepest['cos_epsilon'], 1 - deepest['bloch_length'])

    def test_qite_experiment_ordering(self):
        """Under strong coherent noise RC and rescaling each help and combine best"""
        errors = {name: [] for name in ('exp1', 'exp2', 'exp3', 'exp4', 'exp5')}
        infidelities = {name: [] for name in errors}
        for seed in (11, 12, 13):
            summaries = self.runner(seed=seed, preset='coherent_heavy').run_qite()
            for name in errors:
                errors[name].append(summaries[name]['rel_error_mean'])
                infidelities[name].append(summaries[name]['infidelity_mean'])
        mean = {name: float(np.mean(v)) for name, v in errors.items()}
        self.assertGreater(mean['exp1'], mean['exp2'])
        self.assertGreater(mean['exp1'], mean['exp3'])
        self.assertGreater(mean['exp3'], mean['exp4'])
        self.assertGreaterEqual(mean['exp4'] + 1e-3, mean['exp5'])
        self.assertGreaterEqual(np.mean(infidelities['exp4']) + 1e-3, np.mean(infidelities['exp5']))

    def test_phase_diagram_accuracy(self):
        for row in self.runner().run_phase_diagram():
            self.assertLess(row['ground_rel_error'], 0.01, f"h={row['h']}")
            self.assertLess(row['excited_rel_error'], 0.01, f"h={row['h']}")
            self.assertLess(row['magnetization_error'], 0.01, f"h={row['h']}")

    def test_variance_model_ratio(self):
        for row in self.runner().run_variance_study():
            self.assertGreaterEqual(row['ratio'], 0.75, f"M={row['randomizations']}, N={row['shots']}")
            self.assertLessEqual(row['ratio'], 1.33, f"M={row['randomizations']}, N={row['shots']}")


if __name__ == '__main__':
    unittest.main()
