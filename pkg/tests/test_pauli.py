"""
Tests for the Pauli algebra module
Exact products, commutation, Clifford conjugation and Pauli transfer matrices
"""

import unittest
import sys
from pathlib import Path

import numpy as np

# Add parent directory to path
sys.path.insert(0, str(Path(__file__).parent.parent))

from src.pauli import (
    CLIFFORD_MATRICES,
    Channel,
    CliffordGate,
    PauliString,
    commutes,
    conjugate_through,
    decompose_operator,
    non_identity_paulis,
    parse_pauli_map,
    pauli_basis,
    pauli_index,
    pauli_mul,
    pauli_ptm_signs,
    ptm_of,
    random_pauli,
)


class TestPauliString(unittest.TestCase):
    """Parsing, labels and matrices"""

    def test_label_round_trip_with_sign(self):
        """Signed labels keep their prefix"""
        for label in ('XIZ', '-YY', 'iXZ', '-iXZ'):
            self.assertEqual(PauliString.from_label(label).label, label)

    def test_plus_prefix_is_dropped(self):
        self.assertEqual(PauliString.from_label('+XY').label, 'XY')
        self.assertEqual(PauliString.from_label('+iZ').label, 'iZ')

    def test_invalid_symbol_rejected(self):
        with self.assertRaises(ValueError):
            PauliString.from_label('XQ')
        with self.assertRaises(ValueError):
            PauliString.from_label('')

    def test_bit_encoding(self):
        """I, X, Y, Z map to (0,0), (1,0), (1,1), (0,1)"""
        p = PauliString.from_label('IXYZ')
        self.assertEqual(p.x_bits, (0, 1, 1, 0))
        self.assertEqual(p.z_bits, (0, 0, 1, 1))

    def test_matrix_qubit_zero_is_most_significant(self):
        p = PauliString.from_label('ZI')
        np.testing.assert_allclose(np.diag(p.to_matrix()).real, [1, 1, -1, -1])

    def test_weight_support_and_y_count(self):
        p = PauliString.from_label('YIXY')
        self.assertEqual(p.weight(), 3)
        self.assertEqual(p.support, (0, 2, 3))
        self.assertEqual(p.y_count(), 2)

    def test_single(self):
        self.assertEqual(PauliString.single(3, 1, 'Z').label, 'IZI')
        with self.assertRaises(ValueError):
            PauliString.single(2, 2, 'X')

    def test_hermitian_flag(self):
        self.assertTrue(PauliString.from_label('-XY').is_hermitian)
        self.assertFalse(PauliString.from_label('iXY').is_hermitian)


class TestPauliProduct(unittest.TestCase):
    """pauli_mul agrees with matrix multiplication"""

    def test_single_qubit_table(self):
        self.assertEqual(pauli_mul(PauliString.from_label('X'), PauliString.from_label('Y')).label, 'iZ')
        self.assertEqual(pauli_mul(PauliString.from_label('Y'), PauliString.from_label('X')).label, '-iZ')
        self.assertEqual(pauli_mul(PauliString.from_label('Z'), PauliString.from_label('Z')).label, 'I')

    def test_two_qubit_product(self):
        """XX * YY = -ZZ"""
        product = pauli_mul(PauliString.from_label('XX'), PauliString.from_label('YY'))
        self.assertEqual(product.label, '-ZZ')

    def test_products_match_matrices(self):
        rng = np.random.default_rng(7)
        for _ in range(50):
            p = random_pauli(3, rng)
            q = random_pauli(3, rng)
            if rng.random() < 0.5:
                q = q.negated()
            np.testing.assert_allclose(pauli_mul(p, q).to_matrix(), p.to_matrix() @ q.to_matrix(), atol=1e-12)

    def test_dimension_mismatch(self):
        with self.assertRaises(ValueError):
            pauli_mul(PauliString.from_label('X'), PauliString.from_label('XX'))


class TestCommutation(unittest.TestCase):

    def test_known_pairs(self):
        self.assertTrue(commutes(PauliString.from_label('XX'), PauliString.from_label('ZZ')))
        self.assertFalse(commutes(PauliString.from_label('XI'), PauliString.from_label('ZI')))
        self.assertTrue(commutes(PauliString.from_label('-XY'), PauliString.from_label('XY')))

    def test_agrees_with_matrices(self):
        for p in pauli_basis(2):
            for q in pauli_basis(2):
                a, b = p.to_matrix(), q.to_matrix()
                self.assertEqual(commutes(p, q), bool(np.allclose(a @ b, b @ a)))


class TestBasis(unittest.TestCase):

    def test_ordering(self):
        """Lexicographic in I, X, Y, Z with qubit 0 most significant"""
        labels = [p.label for p in pauli_basis(2)]
        self.assertEqual(labels[:5], ['II', 'IX', 'IY', 'IZ', 'XI'])
        self.assertEqual(len(labels), 16)
        self.assertEqual(pauli_index(PauliString.from_label('ZY')), 14)

    def test_non_identity_count(self):
        self.assertEqual(len(non_identity_paulis(3)), 63)

    def test_decompose_operator(self):
        matrix = 0.5 * PauliString.from_label('XZ').to_matrix() - 2.0 * PauliString.from_label('II').to_matrix()
        coefficients = decompose_operator(matrix)
        self.assertEqual(len(coefficients), 2)
        self.assertAlmostEqual(coefficients[PauliString.from_label('XZ')].real, 0.5, places=12)
        self.assertAlmostEqual(coefficients[PauliString.from_label('II')].real, -2.0, places=12)

    def test_parse_pauli_map(self):
        mapping = parse_pauli_map({'ZZ': 0.1, 'IZ': 0.2})
        self.assertAlmostEqual(mapping[PauliString.from_label('ZZ')], 0.1)
        self.assertEqual(parse_pauli_map(None), {})


class TestCliffordConjugation(unittest.TestCase):
    """conjugate_through against dense conjugation"""

    def test_cz_maps_x_to_xz(self):
        gate = CliffordGate('CZ', (0, 1))
        self.assertEqual(conjugate_through(PauliString.from_label('XI'), gate).label, 'XZ')
        self.assertEqual(conjugate_through(PauliString.from_label('IX'), gate).label, 'ZX')
        self.assertEqual(conjugate_through(PauliString.from_label('ZZ'), gate).label, 'ZZ')

    def test_cz_on_y_pair(self):
        """CZ (YY) CZ = XX"""
        gate = CliffordGate('CZ', (0, 1))
        self.assertEqual(conjugate_through(PauliString.from_label('YY'), gate).label, 'XX')

    def test_hadamard_and_phase(self):
        self.assertEqual(conjugate_through(PauliString.from_label('X'), CliffordGate('H', (0,))).label, 'Z')
        self.assertEqual(conjugate_through(PauliString.from_label('X'), CliffordGate('S', (0,))).label, 'Y')
        self.assertEqual(conjugate_through(PauliString.from_label('Y'), CliffordGate('S', (0,))).label, '-X')

    def test_matches_dense_conjugation_on_three_qubits(self):
        gate = CliffordGate('CZ', (0, 2))
        cz = np.diag([1, 1, 1, 1, 1, -1, 1, -1]).astype(complex)
        for p in pauli_basis(3):
            image = conjugate_through(p, gate)
            np.testing.assert_allclose(image.to_matrix(), cz @ p.to_matrix() @ cz, atol=1e-12)

    def test_invalid_gates(self):
        with self.assertRaises(ValueError):
            CliffordGate('T', (0,))
        with self.assertRaises(ValueError):
            CliffordGate('CZ', (1, 1))
        with self.assertRaises(ValueError):
            conjugate_through(PauliString.from_label('XX'), CliffordGate('CZ', (0, 2)))


class TestPTM(unittest.TestCase):
    """Pauli transfer matrices of unitaries and Pauli channels"""

    def test_unitary_ptm_is_orthogonal_and_trace_preserving(self):
        ptm = ptm_of(Channel.unitary(CLIFFORD_MATRICES['CZ']))
        self.assertTrue(ptm.is_trace_preserving())
        self.assertTrue(ptm.is_orthogonal())

    def test_pauli_channel_is_diagonal(self):
        probabilities = {PauliString.from_label('ZZ'): 0.05, PauliString.from_label('XI'): 0.02}
        ptm = ptm_of(Channel.pauli(probabilities, 2))
        off_diagonal = ptm.matrix - np.diag(ptm.diagonal())
        self.assertLess(np.max(np.abs(off_diagonal)), 1e-12)
        self.assertAlmostEqual(ptm.decays()[PauliString.from_label('ZI')], 1 - 2 * 0.02, places=12)
        self.assertAlmostEqual(ptm.decays()[PauliString.from_label('XI')], 1 - 2 * 0.05, places=12)

    def test_depolarizing_decays(self):
        ptm = ptm_of(Channel.depolarizing(2, 0.1))
        for value in ptm.decays().values():
            self.assertAlmostEqual(value, 0.9, places=12)

    def test_compose_order(self):
        """compose applies the argument first"""
        h = ptm_of(Channel.unitary(CLIFFORD_MATRICES['H']))
        s = ptm_of(Channel.unitary(CLIFFORD_MATRICES['S']))
        expected = ptm_of(Channel.unitary(CLIFFORD_MATRICES['S'] @ CLIFFORD_MATRICES['H']))
        np.testing.assert_allclose(s.compose(h).matrix, expected.matrix, atol=1e-12)

    def test_pauli_conjugation_signs(self):
        t = PauliString.from_label('XZ')
        expected = ptm_of(Channel.unitary(t.to_matrix()))
        np.testing.assert_allclose(np.diag(pauli_ptm_signs(t)), expected.matrix, atol=1e-12)

    def test_incomplete_kraus_rejected(self):
        with self.assertRaises(ValueError):
            ptm_of(Channel.from_kraus([0.5 * np.eye(2)]))

    def test_size_limit(self):
        with self.assertRaises(ValueError):
            ptm_of(Channel.unitary(np.eye(32)))

    def test_invalid_probabilities(self):
        with self.assertRaises(ValueError):
            Channel.pauli({PauliString.from_label('X'): 0.7, PauliString.from_label('Z'): 0.6}, 1)


if __name__ == '__main__':
    unittest.main()
