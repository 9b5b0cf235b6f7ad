"""
Tests for unitary synthesis
Phase gadgets, exact compilation and the three-qubit product formula
"""

import unittest
import sys
from pathlib import Path

import numpy as np
from scipy.linalg import expm

# Add parent directory to path
sys.path.insert(0, str(Path(__file__).parent.parent))

from src.circuit import haar_random_unitary, net_unitary, phase_distance
from src.pauli import PauliString
from src.qite import generator_support
from src.synthesis import (
    GeneratorSet,
    SynthesisError,
    compile_unitary,
    pauli_exponential_circuit,
    synthesize,
)


def generators(*pairs) -> GeneratorSet:
    return GeneratorSet(tuple(PauliString.from_label(l) for l, _ in pairs), [a for _, a in pairs])


class TestCompileUnitary(unittest.TestCase):
    """Exact compilation of dense unitaries"""

    def setUp(self):
        self.rng = np.random.default_rng(31)

    def test_single_qubit(self):
        u = haar_random_unitary(1, self.rng)
        circuit = compile_unitary(u)
        self.assertEqual(circuit.cz_count(), 0)
        self.assertLess(phase_distance(net_unitary(circuit), u), 1e-10)

    def test_two_qubits(self):
        u = haar_random_unitary(2, self.rng)
        circuit = compile_unitary(u)
        self.assertEqual(circuit.cz_count(), 3)
        self.assertLess(phase_distance(net_unitary(circuit), u), 1e-8)

    def test_three_qubits(self):
        for _ in range(3):
            u = haar_random_unitary(3, self.rng)
            circuit = compile_unitary(u)
            self.assertEqual(circuit.cz_count(), 24)
            self.assertLess(phase_distance(net_unitary(circuit), u), 1e-8)

    def test_identity_needs_no_gates(self):
        self.assertEqual(compile_unitary(np.eye(8)).cz_count(), 0)
        self.assertEqual(compile_unitary(-1j * np.eye(4)).cz_count(), 0)

    def test_invalid_shape(self):
        with self.assertRaises(ValueError):
            compile_unitary(np.eye(16))
        with self.assertRaises(ValueError):
            compile_unitary(np.eye(3))


class TestPauliExponential(unittest.TestCase):

    def test_single_generator(self):
        pauli = PauliString.from_label('YXI')
        circuit = pauli_exponential_circuit(pauli, 0.1)
        self.assertEqual(circuit.cz_count(), 2)
        self.assertLess(phase_distance(net_unitary(circuit), expm(-0.1j * pauli.to_matrix())), 1e-10)

    def test_weight_three(self):
        pauli = PauliString.from_label('XZY')
        circuit = pauli_exponential_circuit(pauli, -0.37)
        self.assertEqual(circuit.cz_count(), 4)
        self.assertLess(phase_distance(net_unitary(circuit), expm(0.37j * pauli.to_matrix())), 1e-10)

    def test_negative_sign_flips_angle(self):
        circuit = pauli_exponential_circuit(PauliString.from_label('-ZZ'), 0.2)
        expected = expm(0.2j * PauliString.from_label('ZZ').to_matrix())
        self.assertLess(phase_distance(net_unitary(circuit), expected), 1e-10)

    def test_non_hermitian_rejected(self):
        with self.assertRaises(ValueError):
            pauli_exponential_circuit(PauliString.from_label('iXY'), 0.1)


class TestSynthesize(unittest.TestCase):

    def test_one_qubit(self):
        step = generators(('Y', 0.3))
        circuit = synthesize(step)
        self.assertEqual(circuit.cz_count(), 0)
        self.assertLess(phase_distance(net_unitary(circuit), step.unitary()), 1e-10)

    def test_two_qubits_exact(self):
        rng = np.random.default_rng(7)
        step = generators(('YX', rng.normal(scale=0.2)), ('XY', rng.normal(scale=0.2)))
        circuit = synthesize(step)
        self.assertLessEqual(circuit.cz_count(), 3)
        self.assertLess(phase_distance(net_unitary(circuit), step.unitary()), 1e-8)

    def test_three_qubit_product_formula(self):
        step = generators(('YXI', 0.01), ('IYX', 0.02))
        circuit = synthesize(step, tolerance=1e-3, cz_cap=40)
        self.assertLessEqual(circuit.cz_count(), 40)
        self.assertLess(phase_distance(net_unitary(circuit), step.unitary()), 1e-3)

    def test_commuting_generators_single_slice(self):
        step = generators(('YXI', 0.4), ('XYI', 0.3))
        circuit = synthesize(step, tolerance=1e-8)
        self.assertEqual(circuit.cz_count(), 4)

    def test_cap_exceeded(self):
        step = generators(('YXI', 0.8), ('IYX', 0.9))
        with self.assertRaises(SynthesisError):
            synthesize(step, tolerance=1e-6, cz_cap=8)

    def test_zero_generators(self):
        step = GeneratorSet.zeros(generator_support(3))
        self.assertTrue(step.is_zero())
        self.assertEqual(synthesize(step).cz_count(), 0)

    def test_too_wide(self):
        with self.assertRaises(ValueError):
            synthesize(generators(('YXII', 0.1)))


class TestGeneratorSet(unittest.TestCase):

    def test_validation(self):
        with self.assertRaises(ValueError):
            GeneratorSet((PauliString.from_label('XY'),), [0.1, 0.2])
        with self.assertRaises(ValueError):
            GeneratorSet((), [])
        with self.assertRaises(ValueError):
            generators(('XY', 0.1), ('XYZ', 0.1))

    def test_as_dict(self):
        step = generators(('YX', 0.25), ('XY', -0.5))
        self.assertEqual(step.as_dict(), {'YX': 0.25, 'XY': -0.5})
        self.assertAlmostEqual(step.norm(), np.sqrt(0.3125))


if __name__ == '__main__':
    unittest.main()
