"""
Tests for hard-cycle noise presets
"""

import unittest
import sys
from pathlib import Path

import numpy as np

# Add parent directory to path
sys.path.insert(0, str(Path(__file__).parent.parent))

from src.circuit import HardCycle
from src.noise_model import (
    NoiseEntry,
    NoiseModel,
    NoiseModelError,
    ReadoutError,
    convolve_pauli_channels,
    cycle_signatures,
)
from src.pauli import PauliString


class TestPresets(unittest.TestCase):
    """Named presets built from config"""

    def setUp(self):
        self.cz = HardCycle(2, ((0, 1),))

    def test_default_preset(self):
        model = NoiseModel.from_config({})
        self.assertEqual(model.name, 'device_like_cz')

    def test_config_overrides_preset(self):
        config = {'noise_presets': {'device_like_cz': {'depolarizing': 0.03}}}
        model = NoiseModel.from_config(config)
        self.assertAlmostEqual(model.depolarizing, 0.03)
        self.assertEqual(model.zz_angle, 0.0)

    def test_unknown_preset(self):
        with self.assertRaises(ValueError):
            NoiseModel.from_config({}, 'nope')

    def test_device_like_decays(self):
        """0.04/0.02 rad rotations and 1% Pauli noise: depolarizing decay times cos of each anticommuting angle"""
        model = NoiseModel.from_config({}, 'device_like_cz')
        self.assertEqual((model.zz_angle, model.z_angle, model.idle_z_angle, model.depolarizing),
                         (0.04, 0.02, 0.01, 0.01))
        decays = model.analytic_decays(self.cz)
        depolarizing = 1 - 16 * 0.01 / 15
        self.assertAlmostEqual(decays[PauliString.from_label('ZZ')], depolarizing, places=12)
        self.assertAlmostEqual(decays[PauliString.from_label('XX')], depolarizing * np.cos(0.02) ** 2, places=12)
        self.assertAlmostEqual(decays[PauliString.from_label('XI')], depolarizing * np.cos(0.04) * np.cos(0.02),
                               places=12)
        values = np.array(list(decays.values()))
        self.assertEqual(len(values), 15)
        self.assertAlmostEqual(values.mean(), 0.9887, delta=0.0005)
        self.assertLess(values.std(), 0.002)

    def test_lambda_980_decays(self):
        """Mean decay near 0.980 with a spread of a few 1e-3"""
        decays = NoiseModel.from_config({}, 'lambda_980_cz').analytic_decays(self.cz)
        values = np.array(list(decays.values()))
        self.assertEqual(len(values), 15)
        self.assertAlmostEqual(values.mean(), 0.980, places=2)
        self.assertLess(values.std(), 0.006)
        self.assertGreater(values.std(), 0.001)
        self.assertTrue(np.all(values <= 1.0))

    def test_depolarizing_only_is_uniform(self):
        """Uniform p/15 on a pair shrinks every Pauli by 1 - 16p/15"""
        model = NoiseModel.from_config({}, 'depolarizing_only')
        for value in model.analytic_decays(self.cz).values():
            self.assertAlmostEqual(value, 1 - 16 * 0.02 / 15, places=12)

    def test_spectator_paulis_untouched_without_idle_noise(self):
        model = NoiseModel.from_config({}, 'depolarizing_only')
        decays = model.analytic_decays(HardCycle(3, ((0, 1),)))
        self.assertEqual(len(decays), 63)
        self.assertAlmostEqual(decays[PauliString.from_label('IIX')], 1.0, places=12)
        self.assertAlmostEqual(decays[PauliString.from_label('XIX')], 1 - 16 * 0.02 / 15, places=12)

    def test_noiseless(self):
        model = NoiseModel.noiseless()
        self.assertTrue(model.is_noiseless)
        np.testing.assert_allclose(model.superoperator(self.cz),
                                   np.kron(self.cz.matrix(), self.cz.matrix().conj()), atol=1e-14)

    def test_invalid_depolarizing(self):
        with self.assertRaises(ValueError):
            NoiseModel({'depolarizing': 1.5})


class TestEntries(unittest.TestCase):

    def test_explicit_entry_and_strict_mode(self):
        preset = {
            'strict': True,
            'entries': {'cz:(0,1)/n=2': {'pauli_probabilities': {'ZZ': 0.1}}},
        }
        model = NoiseModel(preset, name='strict')
        decays = model.analytic_decays(HardCycle(2, ((0, 1),)))
        self.assertAlmostEqual(decays[PauliString.from_label('XI')], 0.8, places=12)
        self.assertAlmostEqual(decays[PauliString.from_label('ZI')], 1.0, places=12)
        with self.assertRaises(NoiseModelError):
            model.entry(HardCycle(3, ((0, 1),)))

    def test_superoperator_preserves_trace(self):
        model = NoiseModel.from_config({}, 'coherent_heavy')
        superop = model.superoperator(HardCycle(3, ((1, 2),)))
        rng = np.random.default_rng(1)
        a = rng.standard_normal((8, 8)) + 1j * rng.standard_normal((8, 8))
        rho = a @ a.conj().T
        rho /= np.trace(rho)
        image = (superop @ rho.reshape(-1)).reshape(8, 8)
        self.assertAlmostEqual(np.trace(image).real, 1.0, places=12)
        self.assertGreater(np.linalg.eigvalsh((image + image.conj().T) / 2).min(), -1e-12)

    def test_entry_validation(self):
        with self.assertRaises(ValueError):
            NoiseEntry(2, pauli_probabilities={PauliString.from_label('ZZ'): 0.7, PauliString.from_label('XX'): 0.5})
        with self.assertRaises(ValueError):
            NoiseEntry(2, pauli_probabilities={PauliString.from_label('II'): 0.1})

    def test_convolution(self):
        """Two X flips with probability p give X with 2p(1-p)"""
        x = PauliString.from_label('X')
        combined = convolve_pauli_channels({x: 0.1}, {x: 0.1}, 1)
        self.assertAlmostEqual(combined[x], 0.18, places=12)

    def test_cycle_signatures(self):
        cz = HardCycle(2, ((0, 1),))
        counts = cycle_signatures([cz, cz, HardCycle(2)])
        self.assertEqual(counts, [('cz:(0,1)/n=2', 2), ('idle/n=2', 1)])


class TestReadout(unittest.TestCase):

    def test_confusion(self):
        readout = ReadoutError(p01=0.1, p10=0.2)
        out = readout.apply(np.array([1.0, 0.0, 0.0, 0.0]), 2)
        np.testing.assert_allclose(out, [0.81, 0.09, 0.09, 0.01], atol=1e-12)
        out = readout.apply(np.array([0.0, 0.0, 0.0, 1.0]), 2)
        np.testing.assert_allclose(out, [0.04, 0.16, 0.16, 0.64], atol=1e-12)

    def test_invalid(self):
        with self.assertRaises(ValueError):
            ReadoutError(p01=-0.1)


if __name__ == '__main__':
    unittest.main()
