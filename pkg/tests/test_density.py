import unittest

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from boundchain.density import (
    DensityMatrix,
    Cut,
    abe_channel,
    bell_projector,
    fidelity_pure,
    kron,
    maximally_mixed,
    negativity,
    partial_trace,
    partial_transpose,
    permute_parties,
    ppt_certificate,
    smolin_density,
    werner,
)
from boundchain.errors import DensifyLimitError, InvalidStateError, QubitIndexError
from boundchain.stabilizer import BellIndex


class DensityMatrixTestCase(unittest.TestCase):
    def test_validation(self):
        with self.assertRaises(InvalidStateError):
            DensityMatrix(np.eye(3) / 3)
        with self.assertRaises(InvalidStateError):
            DensityMatrix(np.eye(2))
        with self.assertRaises(InvalidStateError):
            DensityMatrix(np.array([[0.5, 1], [0, 0.5]]))
        with self.assertRaises(InvalidStateError):
            DensityMatrix(np.diag([1.5, -0.5]))
        with self.assertRaises(DensifyLimitError):
            maximally_mixed(13)

    def test_read_only(self):
        rho = maximally_mixed(1)
        with self.assertRaises(ValueError):
            rho.data[0, 0] = 1

    def test_cut_by_register_labels(self):
        rho = DensityMatrix(np.eye(4) / 4, qubits=(7, 3))
        self.assertEqual(rho.cut([3]), Cut.of([1], 2))
        with self.assertRaises(QubitIndexError):
            rho.cut([0])

    def test_cut_sides(self):
        with self.assertRaises(QubitIndexError):
            Cut.of([], 2)
        with self.assertRaises(QubitIndexError):
            Cut.of([0, 1], 2)
        self.assertEqual(Cut.of([0], 2).mirrored(), Cut.of([1], 2))


class EntanglementTestCase(unittest.TestCase):
    def test_singlet(self):
        rho = bell_projector(BellIndex.PSI_MINUS)
        cut = Cut.of([0], 2)
        self.assertAlmostEqual(negativity(rho, cut), 0.5, places=12)
        certificate = ppt_certificate(rho, cut)
        self.assertFalse(certificate.is_ppt)
        self.assertAlmostEqual(certificate.min_eigenvalue, -0.5, places=12)
        self.assertAlmostEqual(fidelity_pure(rho, BellIndex.PSI_MINUS), 1.0, places=12)
        self.assertAlmostEqual(fidelity_pure(rho, BellIndex.PHI_PLUS), 0.0, places=12)

    def test_werner_threshold(self):
        cut = Cut.of([0], 2)
        self.assertTrue(ppt_certificate(werner(1 / 3), cut).is_ppt)
        self.assertFalse(ppt_certificate(werner(0.34), cut).is_ppt)
        self.assertAlmostEqual(fidelity_pure(werner(0.5), BellIndex.PSI_MINUS), 0.625)

    def test_partial_transpose_is_involution(self):
        rho = kron(werner(0.3), maximally_mixed(1))
        cut = Cut.of([0, 2], 3)
        once = DensityMatrix(partial_transpose(rho, cut))
        np.testing.assert_allclose(partial_transpose(once, cut), rho.data, atol=1e-12)

    def test_wrong_cut_size(self):
        with self.assertRaises(QubitIndexError):
            negativity(werner(1), Cut.of([0], 3))

    def test_tolerance_must_be_positive(self):
        with self.assertRaises(InvalidStateError):
            ppt_certificate(werner(1), Cut.of([0], 2), tol=0)


class FourPartyStateTestCase(unittest.TestCase):
    def setUp(self):
        self.rho = smolin_density()

    def test_spectrum(self):
        eigenvalues = np.sort(self.rho.eigenvalues)
        np.testing.assert_allclose(eigenvalues[:12], 0, atol=1e-12)
        np.testing.assert_allclose(eigenvalues[12:], 0.25, atol=1e-12)

    def test_two_two_cuts_are_ppt(self):
        for left in ((0, 1), (0, 2), (0, 3)):
            certificate = ppt_certificate(self.rho, Cut.of(left, 4))
            self.assertTrue(certificate.is_ppt, left)
            self.assertAlmostEqual(certificate.min_eigenvalue, 0.0, places=12)

    def test_one_three_cuts_are_npt(self):
        for party in range(4):
            cut = Cut.of([party], 4)
            self.assertAlmostEqual(negativity(self.rho, cut), 0.5, places=12)
            self.assertAlmostEqual(ppt_certificate(self.rho, cut).min_eigenvalue, -0.125, places=12)

    def test_permutation_symmetry(self):
        for perm in ((1, 0, 3, 2), (0, 2, 1, 3), (3, 2, 1, 0), (2, 0, 3, 1)):
            self.assertLess(permute_parties(self.rho, perm).deviation(self.rho), 1e-12)

    def test_two_party_marginals_are_mixed(self):
        for keep in ((0, 1), (1, 3), (0, 2)):
            self.assertTrue(partial_trace(self.rho, keep).is_close(maximally_mixed(2)))


@pytest.mark.parametrize("p", [i / 10 for i in range(11)])
def test_abe_channel_keeps_werner_states(p: float):
    assert abe_channel(werner(p)).is_close(werner(p))


def test_abe_channel_depolarizes_product_states():
    zero = DensityMatrix(np.diag([1, 0, 0, 0]).astype(complex))
    expected = np.diag([0.5, 0, 0, 0.5]).astype(complex)
    np.testing.assert_allclose(abe_channel(zero).data, expected, atol=1e-12)


def test_rounding_noise_below_the_tolerance_is_accepted():
    rho = DensityMatrix(np.diag([1 + 5e-11, -5e-11]))
    assert rho.min_eigenvalue == pytest.approx(-5e-11)


@st.composite
def density_matrices(draw, k: int | None = None) -> DensityMatrix:
    k = k if k is not None else draw(st.integers(1, 4))
    dim = 1 << k
    parts = draw(arrays(np.float64, (2, dim, dim), elements=st.floats(-1, 1)))
    a = parts[0] + 1j * parts[1]
    gram = a @ a.conj().T
    trace = np.trace(gram).real
    if trace < 1e-3:
        return maximally_mixed(k)
    gram = (gram + gram.conj().T) / 2
    return DensityMatrix(gram / trace)


@settings(max_examples=200, deadline=None)
@given(density_matrices(2))
def test_abe_channel_is_idempotent(rho: DensityMatrix):
    once = abe_channel(rho)
    assert abe_channel(once).is_close(once, tol=1e-10)


@settings(max_examples=200, deadline=None)
@given(st.data())
def test_negativity_ignores_the_side_transposed(data):
    rho = data.draw(density_matrices(data.draw(st.integers(2, 4))))
    left = data.draw(st.sets(st.integers(0, rho.k - 1), min_size=1, max_size=rho.k - 1))
    cut = Cut.of(left, rho.k)
    assert negativity(rho, cut) == pytest.approx(negativity(rho, cut.mirrored()), abs=1e-10)


@settings(max_examples=200, deadline=None)
@given(st.data())
def test_relabelling_keeps_the_spectrum(data):
    rho = data.draw(density_matrices())
    perm = data.draw(st.permutations(range(rho.k)))
    np.testing.assert_allclose(
        permute_parties(rho, perm).eigenvalues, rho.eigenvalues, atol=1e-10
    )


def test_partial_trace_keeps_labels():
    rho = kron(bell_projector(BellIndex.PHI_PLUS), maximally_mixed(1))
    reduced = partial_trace(rho, [2, 0])
    assert reduced.qubits == (2, 0)
    assert reduced.is_close(maximally_mixed(2))


@pytest.mark.parametrize("shape", [(2,), (8,)])
def test_bell_projector_shape(shape):
    with pytest.raises(InvalidStateError):
        bell_projector(np.ones(shape))
