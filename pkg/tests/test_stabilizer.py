import unittest
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from boundchain.errors import DensifyLimitError, InvalidStateError, QubitIndexError
from boundchain.stabilizer import (
    BellIndex,
    Gate,
    GateOp,
    PauliString,
    StabilizerState,
    apply_circuit,
    apply_clifford,
    bell_measure,
    measure_pauli,
    prepare_bell,
    reduced_density,
    to_statevector,
)

from tests import oracle
from tests.strategies import MAX_QUBITS, gate_ops, pauli_strings


class PauliStringTestCase(unittest.TestCase):
    def test_label_round_trip(self):
        for label in ("+IXYZ", "-XX", "+iZ", "-iYI"):
            self.assertEqual(PauliString.from_label(label).label, label)
        self.assertEqual(PauliString.from_label("XZ").label, "+XZ")

    def test_single_qubit_products(self):
        x, y, z = (PauliString.from_label(p) for p in "XYZ")
        self.assertEqual((x * y).label, "+iZ")
        self.assertEqual((y * x).label, "-iZ")
        self.assertEqual((y * z).label, "+iX")
        self.assertEqual((z * x).label, "+iY")
        self.assertEqual((x * x).label, "+I")

    def test_commutation(self):
        xx, zz = PauliString.from_label("XX"), PauliString.from_label("ZZ")
        self.assertTrue(xx.commutes_with(zz))
        self.assertFalse(PauliString.from_label("XI").commutes_with(zz))

    def test_restrict_and_embed(self):
        p = PauliString.from_label("-XIZY")
        self.assertEqual(p.support, (0, 2, 3))
        self.assertEqual(p.weight, 3)
        self.assertEqual(p.restricted([3, 0]).label, "-YX")
        self.assertEqual(p.restricted([3, 0]).embedded([3, 0], 4).label, "-XIIY")

    def test_invalid_letter(self):
        with self.assertRaises(InvalidStateError):
            PauliString.from_label("XQ")

    def test_out_of_range(self):
        with self.assertRaises(QubitIndexError):
            PauliString.single(2, 2, "X")
        with self.assertRaises(QubitIndexError):
            PauliString.from_label("X") * PauliString.from_label("XX")


@settings(max_examples=300, deadline=None)
@given(st.data())
def test_product_matches_matrices(data):
    p = data.draw(pauli_strings())
    q = data.draw(pauli_strings(p.n))
    np.testing.assert_allclose((p * q).to_matrix(), p.to_matrix() @ q.to_matrix(), atol=1e-12)
    assert p.commutes_with(q) == np.allclose(
        p.to_matrix() @ q.to_matrix(), q.to_matrix() @ p.to_matrix()
    )


class BellTestCase(unittest.TestCase):
    def test_signs(self):
        self.assertEqual(BellIndex.PHI_PLUS.signs, (1, 1))
        self.assertEqual(BellIndex.PSI_PLUS.signs, (1, -1))
        self.assertEqual(BellIndex.PHI_MINUS.signs, (-1, 1))
        self.assertEqual(BellIndex.PSI_MINUS.signs, (-1, -1))
        for index in BellIndex:
            self.assertIs(BellIndex.from_signs(*index.signs), index)

    def test_singlet_vector(self):
        vector = BellIndex.PSI_MINUS.to_statevector()
        expected = np.array([0, 1, -1, 0]) / np.sqrt(2)
        self.assertAlmostEqual(abs(np.vdot(expected, vector)), 1.0, places=12)

    def test_bell_measurement_of_bell_state(self):
        for index in BellIndex:
            branches = bell_measure(prepare_bell(index), 0, 1)
            self.assertEqual([(b.outcome, b.probability) for b in branches], [(index, Fraction(1))])

    def test_bell_measurement_of_product_state(self):
        branches = bell_measure(StabilizerState.zero_state(2), 0, 1)
        self.assertEqual(
            [(b.outcome, b.probability) for b in branches],
            [(BellIndex.PHI_PLUS, Fraction(1, 2)), (BellIndex.PHI_MINUS, Fraction(1, 2))],
        )

    def test_entanglement_swapping(self):
        state = prepare_bell(BellIndex.PSI_MINUS).tensor(prepare_bell(BellIndex.PSI_MINUS))
        branches = bell_measure(state, 1, 2)
        self.assertEqual(len(branches), 4)
        for branch in branches:
            self.assertEqual(branch.probability, Fraction(1, 4))
            outer = branch.state.local_generators([0, 3])
            self.assertEqual(len(outer), 2)

    def test_same_qubit_twice(self):
        with self.assertRaises(QubitIndexError):
            bell_measure(prepare_bell("psi-"), 1, 1)


class StabilizerStateTestCase(unittest.TestCase):
    def test_equality_is_group_equality(self):
        self.assertEqual(
            StabilizerState.from_labels(["XX", "ZZ"]),
            StabilizerState.from_labels(["-YY", "ZZ"]),
        )
        self.assertNotEqual(
            StabilizerState.from_labels(["XX", "ZZ"]),
            StabilizerState.from_labels(["XX", "-ZZ"]),
        )
        self.assertEqual(
            hash(StabilizerState.from_labels(["XX", "ZZ"])),
            hash(StabilizerState.from_labels(["ZZ", "-YY"])),
        )

    def test_rejects_bad_generators(self):
        with self.assertRaises(InvalidStateError):
            StabilizerState.from_labels(["XI", "ZI"])
        with self.assertRaises(InvalidStateError):
            StabilizerState.from_labels(["XX", "XX"])
        with self.assertRaises(InvalidStateError):
            StabilizerState.from_labels(["iXX", "ZZ"])
        with self.assertRaises(InvalidStateError):
            StabilizerState(2, (PauliString.from_label("XX"),))

    def test_stabilizer_sign(self):
        singlet = prepare_bell(BellIndex.PSI_MINUS)
        self.assertEqual(singlet.stabilizer_sign(PauliString.from_label("YY")), -1)
        self.assertEqual(singlet.stabilizer_sign(PauliString.from_label("XX")), -1)
        self.assertIsNone(singlet.stabilizer_sign(PauliString.from_label("XI")))

    def test_marginals(self):
        singlet = prepare_bell(BellIndex.PSI_MINUS)
        np.testing.assert_allclose(reduced_density(singlet, [0]).data, np.eye(2) / 2)
        with self.assertRaises(InvalidStateError):
            singlet.restricted_state([0])
        product = StabilizerState.from_labels(["-ZI", "IX"])
        self.assertEqual(product.restricted_state([1]), StabilizerState.from_labels(["X"]))
        self.assertTrue(product.factorizes([0]))

    def test_reset_requires_product(self):
        state = prepare_bell("phi+").tensor(StabilizerState.from_labels(["X"]))
        reset = state.reset([2])
        self.assertEqual(reset.restricted_state([2]), StabilizerState.zero_state(1))
        with self.assertRaises(InvalidStateError):
            state.reset([0])

    def test_gate_target_checks(self):
        state = StabilizerState.zero_state(2)
        with self.assertRaises(QubitIndexError):
            apply_clifford(state, Gate.CNOT, (0,))
        with self.assertRaises(QubitIndexError):
            apply_clifford(state, Gate.CNOT, (1, 1))
        with self.assertRaises(QubitIndexError):
            apply_clifford(state, Gate.H, (2,))

    def test_dense_cap(self):
        with self.assertRaises(DensifyLimitError):
            to_statevector(StabilizerState.zero_state(13))

    def test_bell_circuit(self):
        state = apply_circuit(
            StabilizerState.zero_state(2), [GateOp.of("h", 0), GateOp.of("cnot", 0, 1)]
        )
        self.assertEqual(state, prepare_bell(BellIndex.PHI_PLUS))


@settings(max_examples=1000, deadline=None)
@given(st.data())
def test_circuits_and_measurements_match_statevectors(data):
    n = data.draw(st.integers(1, MAX_QUBITS), label="qubits")
    circuit = data.draw(st.lists(gate_ops(n), max_size=20), label="circuit")
    state = apply_circuit(StabilizerState.zero_state(n), circuit)
    vector = oracle.run_circuit(n, circuit)
    np.testing.assert_allclose(
        reduced_density(state, range(n)).data, oracle.density(vector), atol=1e-12
    )

    for _ in range(data.draw(st.integers(0, 3), label="measurements")):
        pauli = data.draw(pauli_strings(n).filter(lambda p: p.is_hermitian), label="pauli")
        branches = measure_pauli(state, pauli)
        assert sum(b.probability for b in branches) == 1
        for branch in branches:
            probability, _ = oracle.project(vector, pauli, branch.outcome)
            assert abs(float(branch.probability) - probability) < 1e-12
        chosen = data.draw(st.sampled_from(branches), label="outcome")
        _, vector = oracle.project(vector, pauli, chosen.outcome)
        state = chosen.state
        np.testing.assert_allclose(
            reduced_density(state, range(n)).data, oracle.density(vector), atol=1e-12
        )


@pytest.mark.parametrize("index", list(BellIndex))
def test_to_statevector_is_stabilized(index: BellIndex):
    state = prepare_bell(index)
    vector = to_statevector(state)
    for generator in state.generators:
        np.testing.assert_allclose(generator.apply_to_vector(vector), vector, atol=1e-12)
