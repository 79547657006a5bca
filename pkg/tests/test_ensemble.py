import unittest
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from boundchain.density import maximally_mixed, smolin_density
from boundchain.ensemble import (
    BellMeasurement,
    Ensemble,
    Member,
    PartyRegistry,
    PauliMeasurement,
    bring_together,
    branch_measure,
    canonical_merge,
    densify,
    discard,
    map_members,
    mix,
    rejoin,
    restrict,
    tensor,
)
from boundchain.errors import InvalidStateError, ProtocolError, QubitIndexError
from boundchain.stabilizer import (
    BellIndex,
    GateOp,
    PauliString,
    StabilizerState,
    apply_circuit,
    prepare_bell,
)

from tests import oracle
from tests.strategies import gate_ops, pauli_strings


class PartyRegistryTestCase(unittest.TestCase):
    def setUp(self):
        self.registry = PartyRegistry.of(["A", "B", "B", "C"])

    def test_ownership(self):
        self.assertEqual(self.registry.parties, ("A", "B", "C"))
        self.assertEqual(self.registry.qubits_of("B"), (1, 2))
        self.assertEqual(self.registry.owner(3), "C")
        with self.assertRaises(QubitIndexError):
            self.registry.owner(4)
        with self.assertRaises(QubitIndexError):
            self.registry.qubits_of("Z")

    def test_bring_together_is_transitive(self):
        registry = self.registry.bring_together("A", "B").bring_together("B", "C")
        self.assertTrue(registry.are_colocated("A", "C"))
        self.assertEqual(registry.group_of("C"), frozenset("ABC"))
        self.assertFalse(self.registry.are_colocated("A", "B"))
        with self.assertRaises(ProtocolError):
            self.registry.bring_together("A", "A")

    def test_tensor_merges_labels(self):
        other = PartyRegistry.of(["C", "D"]).bring_together("C", "D")
        joined = self.registry.bring_together("A", "C").tensor(other)
        self.assertEqual(joined.parties, ("A", "B", "C", "D"))
        self.assertEqual(joined.qubits_of("C"), (3, 4))
        self.assertEqual(joined.group_of("A"), frozenset("ACD"))

    def test_restricted_drops_parties(self):
        restricted = self.registry.restricted([3, 0])
        self.assertEqual(restricted.parties, ("A", "C"))
        self.assertEqual(restricted.ownership, ("C", "A"))

    def test_validation(self):
        with self.assertRaises(InvalidStateError):
            PartyRegistry(("A", "A"), ("A",))
        with self.assertRaises(QubitIndexError):
            PartyRegistry(("A",), ("A", "B"))


class EnsembleTestCase(unittest.TestCase):
    def test_weights_must_sum_to_one(self):
        state = prepare_bell("phi+")
        with self.assertRaises(InvalidStateError):
            Ensemble(2, (Member(Fraction(1, 2), state),), PartyRegistry.solo(2))
        with self.assertRaises(InvalidStateError):
            Ensemble(2, (), PartyRegistry.solo(2))

    def test_non_dyadic_weights_are_allowed_but_flagged(self):
        states = [prepare_bell(i) for i in list(BellIndex)[:3]]
        e = Ensemble(2, tuple(Member(Fraction(1, 3), s) for s in states), PartyRegistry.solo(2))
        self.assertFalse(e.is_dyadic)
        with self.assertRaises(InvalidStateError):
            mix([(Fraction(1, 3), s) for s in states])

    def test_mix_merges_equal_members(self):
        phi = prepare_bell("phi+")
        e = mix([(Fraction(1, 2), phi), (Fraction(1, 2), StabilizerState.from_labels(["ZZ", "XX"]))])
        self.assertEqual(len(e), 1)
        self.assertEqual(e.hidden_members()[0].weight, 1)

    def test_equality_ignores_member_order(self):
        phi, psi = prepare_bell("phi+"), prepare_bell("psi-")
        first = mix([(Fraction(1, 4), phi), (Fraction(3, 4), psi)])
        second = mix([(Fraction(3, 4), psi), (Fraction(1, 4), phi)])
        self.assertEqual(first, second)
        self.assertEqual(hash(first), hash(second))
        self.assertNotEqual(first, mix([(Fraction(1, 2), phi), (Fraction(1, 2), psi)]))

    def test_uniform_bell_mixture_is_maximally_mixed(self):
        e = Ensemble.uniform([prepare_bell(i) for i in BellIndex])
        self.assertTrue(densify(e, [0, 1]).is_close(maximally_mixed(2)))


def test_branch_measure_on_four_party_state(abe: Ensemble):
    outcomes = branch_measure(abe, BellMeasurement(0, 1))
    assert list(outcomes) == list(BellIndex)
    for probability, conditional in outcomes.values():
        assert probability == Fraction(1, 4)
        assert len(conditional) == 1


def test_pauli_measurement_branches():
    e = Ensemble.pure(prepare_bell("phi+"))
    outcomes = branch_measure(e, PauliMeasurement(PauliString.from_label("ZI")))
    assert list(outcomes) == [1, -1]
    assert all(o.probability == Fraction(1, 2) for o in outcomes.values())
    plus = outcomes[1].ensemble.hidden_members()[0].state
    assert plus == StabilizerState.from_labels(["ZI", "IZ"])


def test_densify_four_party_state(abe: Ensemble):
    assert densify(abe, range(4)).deviation(smolin_density()) < 1e-12
    reordered = densify(abe, [2, 0, 3, 1])
    assert reordered.qubits == (2, 0, 3, 1)
    assert reordered.deviation(smolin_density()) < 1e-12


def test_discard_and_consumed(abe: Ensemble):
    measured = branch_measure(abe, BellMeasurement(0, 1))[BellIndex.PSI_MINUS].ensemble
    spent = discard(measured, [0, 1])
    assert spent.consumed == frozenset({0, 1})
    assert spent.live_qubits == (2, 3)
    with pytest.raises(QubitIndexError):
        densify(spent, [0, 2])
    with pytest.raises(InvalidStateError):
        discard(abe, [0])


def test_restrict_requires_product_members(abe: Ensemble):
    left = restrict(abe, [0, 1])
    assert left.registry.parties == ("A", "B")
    assert densify(left, [0, 1]).is_close(maximally_mixed(2))
    with pytest.raises(InvalidStateError):
        restrict(abe, [0, 2])


def test_tensor_renumbers_second_register(abe: Ensemble):
    joined = tensor(Ensemble.pure(prepare_bell("psi-"), PartyRegistry.of(["E", "F"])), abe)
    assert joined.n == 6
    assert len(joined) == 4
    assert joined.registry.qubits_of("A") == (2,)
    assert densify(joined, [2, 3, 4, 5]).deviation(smolin_density()) < 1e-12


def test_map_members_applies_unitary_everywhere():
    e = Ensemble.uniform([StabilizerState.zero_state(2), StabilizerState.from_labels(["-ZI", "IZ"])])
    flipped = map_members(e, [GateOp.of("x", 0)])
    assert flipped == e
    assert map_members(e, PauliString.from_label("XI")) == e


def test_rejoin_allows_any_probabilities(abe: Ensemble):
    outcomes = branch_measure(abe, BellMeasurement(0, 1))
    rejoined = rejoin((o.probability, o.ensemble) for o in outcomes.values())
    assert densify(rejoined, range(4)).deviation(smolin_density()) < 1e-12
    third = Fraction(1, 3)
    e = Ensemble.pure(prepare_bell("phi+"))
    assert rejoin([(third, e), (1 - third, e)]) == e


def test_bring_together_leaves_state_alone(abe: Ensemble):
    together = bring_together(abe, ("A", "B"))
    assert together.registry.are_colocated("A", "B")
    assert together.hidden_members() == abe.hidden_members()


def test_canonical_merge_is_idempotent(abe: Ensemble):
    assert canonical_merge(abe) is abe
    assert np.isclose(sum(float(m.weight) for m in abe.hidden_members()), 1.0)


def test_mix_keeps_consumed_qubits_consistent(abe: Ensemble):
    measured = branch_measure(abe, BellMeasurement(0, 1))[BellIndex.PSI_MINUS].ensemble
    spent = discard(measured, [0, 1])
    half = Fraction(1, 2)
    assert mix([(half, spent), (half, spent)]).consumed == frozenset({0, 1})
    with pytest.raises(InvalidStateError):
        mix([(half, spent), (half, abe)])


def test_relabelled_hands_the_state_over(werner_half: Ensemble):
    moved = werner_half.relabelled(PartyRegistry.of(["B", "D"]))
    assert moved.registry.parties == ("B", "D")
    assert densify(moved, [0, 1]).is_close(densify(werner_half, [0, 1]))
    with pytest.raises(InvalidStateError):
        werner_half.relabelled(PartyRegistry.of(["A"]))


@settings(max_examples=300, deadline=None)
@given(st.data())
def test_mixtures_match_the_dense_oracle(data):
    n = data.draw(st.integers(1, 4), label="qubits")
    k = data.draw(st.sampled_from([1, 2, 4]), label="members")
    circuits = [data.draw(st.lists(gate_ops(n), max_size=12), label="circuit") for _ in range(k)]
    e = mix(
        [(Fraction(1, k), apply_circuit(StabilizerState.zero_state(n), c)) for c in circuits]
    )
    vectors = [oracle.run_circuit(n, c) for c in circuits]
    expected = sum(oracle.density(v) for v in vectors) / k
    np.testing.assert_allclose(densify(e, range(n)).data, expected, atol=1e-12)

    pauli = data.draw(pauli_strings(n).filter(lambda p: p.is_hermitian), label="pauli")
    outcomes = branch_measure(e, PauliMeasurement(pauli))
    assert sum(o.probability for o in outcomes.values()) == 1
    for outcome, (probability, conditional) in outcomes.items():
        assert probability.denominator & (probability.denominator - 1) == 0
        projected = [oracle.project(v, pauli, outcome) for v in vectors]
        joint = sum(p for p, _ in projected) / k
        assert abs(float(probability) - joint) < 1e-12
        expected = sum(p * oracle.density(w) for p, w in projected) / (k * joint)
        np.testing.assert_allclose(densify(conditional, range(n)).data, expected, atol=1e-12)
