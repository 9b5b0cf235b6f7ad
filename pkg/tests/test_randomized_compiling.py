"""
Tests for randomized compiling
Twirl compilation, exhaustive twirl averages and the RC variance model
"""

import unittest
import sys
from pathlib import Path

import numpy as np

# Add parent directory to path
sys.path.insert(0, str(Path(__file__).parent.parent))

from src.circuit import (
    Circuit,
    EasyCycle,
    HardCycle,
    haar_random_unitary,
    net_unitary,
    phase_distance,
    random_kak_circuit,
)
from src.noise_model import NoiseModel
from src.pauli import Channel, PauliString, non_identity_paulis, pauli_basis, pauli_ptm_signs, ptm_of
from src.randomized_compiling import (
    RcPlan,
    apply_twirls,
    correction_for,
    randomize,
    rc_estimate,
    rc_records,
    rc_variance,
    twirled_ptm,
)
from src.simulator import SimulatorBackend


def pauli_probabilities_from_decays(decays, n_qubits):
    """Invert d_P = sum_Q p_Q s_Q(P) for the Pauli channel with the given decays"""
    full = np.array([1.0] + [decays[p] for p in non_identity_paulis(n_qubits)])
    probabilities = {}
    for q in non_identity_paulis(n_qubits):
        probabilities[q.label] = max(0.0, float(pauli_ptm_signs(q) @ full / 4 ** n_qubits))
    return probabilities


class TestTwirlCompilation(unittest.TestCase):
    """Randomized circuits implement the same logical unitary"""

    def setUp(self):
        self.rng = np.random.default_rng(17)
        self.circuit = random_kak_circuit(2, self.rng)

    def test_logical_equivalence(self):
        target = net_unitary(self.circuit)
        for _ in range(20):
            randomized = randomize(self.circuit, self.rng)
            self.assertEqual(randomized.hard_cycles, self.circuit.hard_cycles)
            self.assertEqual(len(randomized.cycles), len(self.circuit.cycles))
            self.assertLess(phase_distance(net_unitary(randomized), target), 1e-8)

    def test_correction_through_cz(self):
        cz = HardCycle(2, ((0, 1),))
        self.assertEqual(correction_for(PauliString.from_label('XI'), cz).label, 'XZ')
        self.assertEqual(correction_for(PauliString.from_label('YY'), cz).label, 'XX')

    def test_wrong_twirl_count(self):
        with self.assertRaises(ValueError):
            apply_twirls(self.circuit, [PauliString.identity(2)])


class TestTwirledPTM(unittest.TestCase):
    """Exhaustive twirl keeps exactly the PTM diagonal"""

    def test_random_channels(self):
        rng = np.random.default_rng(99)
        for _ in range(3):
            # Random CPTP map: two Kraus operators from a random isometry
            isometry = haar_random_unitary(3, rng)[:, :4]
            kraus = [isometry[:4, :], isometry[4:, :]]
            ptm = ptm_of(Channel.from_kraus(kraus))
            twirled = twirled_ptm(ptm)
            off_diagonal = twirled.matrix - np.diag(np.diag(twirled.matrix))
            self.assertLess(np.abs(off_diagonal).max(), 1e-10)
            np.testing.assert_allclose(twirled.diagonal(), ptm.diagonal(), atol=1e-10)

    def test_width_limit(self):
        ptm = ptm_of(Channel.unitary(np.eye(8)))
        with self.assertRaises(ValueError):
            twirled_ptm(ptm)


class TestRcEstimator(unittest.TestCase):

    def setUp(self):
        self.noise = NoiseModel.from_config({}, 'coherent_heavy')
        self.backend = SimulatorBackend(self.noise)
        self.circuit = random_kak_circuit(1, np.random.default_rng(5))

    def test_exhaustive_twirl_matches_pauli_channel(self):
        """Averaging all twirls of a single-cycle circuit equals running its Pauli-channel twirl"""
        rng = np.random.default_rng(21)
        cz = HardCycle(2, ((0, 1),))
        single = Circuit(2, (
            EasyCycle.from_unitaries([haar_random_unitary(1, rng), haar_random_unitary(1, rng)]),
            cz,
            EasyCycle.from_unitaries([haar_random_unitary(1, rng), haar_random_unitary(1, rng)]),
        ))
        plan = RcPlan(single, 16, 0, 0, twirls=[(p,) for p in pauli_basis(2)])
        decays = self.noise.analytic_decays(cz)
        pauli_model = NoiseModel({'entries': {cz.signature: {
            'pauli_probabilities': pauli_probabilities_from_decays(decays, 2)}}}, name='twirled')
        reference = SimulatorBackend(pauli_model)
        for observable in non_identity_paulis(2):
            mean, values = rc_estimate(plan, observable, self.backend)
            self.assertEqual(len(values), 16)
            self.assertAlmostEqual(mean, reference.exact_expectation(single, observable), places=10)

    def test_plan_is_reproducible(self):
        a = RcPlan.create(self.circuit, 5, 100, master_seed=3)
        b = RcPlan.create(self.circuit, 5, 100, master_seed=3)
        self.assertEqual(a.to_dict(), b.to_dict())
        self.assertEqual(a.total_shots, 500)
        observable = PauliString.from_label('ZZ')
        self.assertEqual(rc_estimate(a, observable, self.backend), rc_estimate(b, observable, self.backend))

    def test_prefix_of_larger_plan(self):
        """Randomization m draws the same twirls regardless of M"""
        small = RcPlan.create(self.circuit, 3, 10, master_seed=8)
        large = RcPlan.create(self.circuit, 6, 10, master_seed=8)
        self.assertEqual(small.twirls, large.twirls[:3])

    def test_identity_twirls(self):
        plan = RcPlan.create(self.circuit, 4, 0, master_seed=1, identity_twirls=True)
        _, values = rc_estimate(plan, PauliString.from_label('XZ'), self.backend)
        self.assertAlmostEqual(max(values) - min(values), 0.0, places=12)

    def test_records_need_shots(self):
        plan = RcPlan.create(self.circuit, 2, 0, master_seed=1)
        with self.assertRaises(ValueError):
            rc_records(plan, PauliString.from_label('ZZ'), self.backend)
        with self.assertRaises(ValueError):
            rc_estimate(plan, PauliString.identity(2), self.backend)

    def test_invalid_plan(self):
        with self.assertRaises(ValueError):
            RcPlan.create(self.circuit, 0, 10, master_seed=1)

    def test_plan_from_dict(self):
        """A recorded plan rebuilds the same randomized circuits"""
        plan = RcPlan.create(self.circuit, 4, 25, master_seed=12)
        rebuilt = RcPlan.from_dict(self.circuit, plan.to_dict())
        self.assertEqual(rebuilt.twirls, plan.twirls)
        self.assertEqual(rebuilt.total_shots, 100)
        self.assertEqual([c.to_text() for c in rebuilt.circuits()], [c.to_text() for c in plan.circuits()])
        observable = PauliString.from_label('XY')
        self.assertEqual(rc_estimate(rebuilt, observable, self.backend), rc_estimate(plan, observable, self.backend))

    def test_plan_from_dict_wrong_circuit(self):
        plan = RcPlan.create(self.circuit, 2, 10, master_seed=12)
        deeper = random_kak_circuit(2, np.random.default_rng(6))
        with self.assertRaises(ValueError):
            RcPlan.from_dict(deeper, plan.to_dict())


class TestVarianceModel(unittest.TestCase):

    def test_value(self):
        self.assertAlmostEqual(rc_variance(0.5, 0.1, 5, 100), (0.75 / 100 + 0.99 * 0.01) / 5, places=12)

    def test_limits(self):
        """Large N plateaus at sigma^2 / M; one shot is pure binomial noise"""
        self.assertAlmostEqual(rc_variance(0.2, 0.3, 4, 10 ** 9), 0.09 / 4, places=8)
        self.assertAlmostEqual(rc_variance(0.2, 0.3, 1, 1), 1 - 0.04, places=12)

    def test_invalid(self):
        with self.assertRaises(ValueError):
            rc_variance(1.2, 0.1, 1, 1)
        with self.assertRaises(ValueError):
            rc_variance(0.0, 0.1, 0, 10)


if __name__ == '__main__':
    unittest.main()
