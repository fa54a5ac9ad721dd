import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from bosefrag.boson_algebra import (BosonPolynomial, VibrationalHamiltonian, build_hamiltonian,
                                    extract_coeffs, normal_order, poly_add, poly_mul)
from bosefrag.fock_sim import FockBasis, to_matrix

from conftest import ladder_matrix, word_matrix


def mono(*pairs):
    return tuple(pairs)


def test_single_commutator():
    p = normal_order([(0, False), (0, True)], 1)
    assert p.terms == {mono((1, 1)): 1.0, mono((0, 0)): 1.0}


def test_already_normal_ordered():
    p = normal_order([(0, True), (0, False)], 1)
    assert p.terms == {mono((1, 1)): 1.0}


def test_bb_bdag_bdag():
    p = normal_order([(0, False), (0, False), (0, True), (0, True)], 1)
    assert p.terms == {mono((2, 2)): 1.0, mono((1, 1)): 4.0, mono((0, 0)): 2.0}
    # matrix oracle on |n>, n <= 5, computed with room above the block
    a = ladder_matrix(12)
    ref = a @ a @ a.T @ a.T
    got = to_matrix(p, FockBasis((12,)))
    np.testing.assert_allclose(got[:6, :6], ref[:6, :6], atol=1e-12)


def test_mode_out_of_range():
    with pytest.raises(ValueError):
        normal_order([(2, True)], 2)


def test_number_squared():
    n = BosonPolynomial.number(1, 0)
    p = poly_mul(n, n)
    assert p.terms == {mono((2, 2)): 1.0, mono((1, 1)): 1.0}
    np.testing.assert_allclose(np.diag(to_matrix(p, FockBasis((6,)))), np.arange(7) ** 2)


def test_ring_trivia():
    p = BosonPolynomial.position(2, 0) * BosonPolynomial.number(2, 1) + 0.3
    assert poly_add(p, -1.0 * p).is_zero()
    assert poly_mul(BosonPolynomial.constant(2), p) == p


def test_complex_coefficients_rejected():
    with pytest.raises((TypeError, ValueError)):
        BosonPolynomial(1, {mono((1, 0)): 1j})


def test_harmonic_hamiltonian():
    h = VibrationalHamiltonian.from_raw([1500.0])
    H = build_hamiltonian(h)
    assert H.terms == {mono((1, 1)): 1500.0, mono((0, 0)): 750.0}


def test_quartic_hamiltonian_matches_q4():
    v = 7.5
    H = build_hamiltonian(VibrationalHamiltonian.from_raw([0.0], quartic=[[0, 0, 0, 0, v]]))
    assert H.coeff(mono((2, 2))) == pytest.approx(6 * v / 4)
    a = ladder_matrix(20)
    q = (a + a.T) / math.sqrt(2)
    ref = v * np.linalg.matrix_power(q, 4)
    np.testing.assert_allclose(to_matrix(H, FockBasis((20,)))[:7, :7], ref[:7, :7], atol=1e-10)


def test_symmetrization_of_raw_entries():
    h = VibrationalHamiltonian.from_raw([1.0, 2.0], cubic=[[0, 0, 1, 3.0], [1, 0, 0, 3.0]])
    assert h.v3(0, 1, 0) == h.v3(1, 0, 0) == h.v3(0, 0, 1) == pytest.approx(2.0)
    H1 = build_hamiltonian(h)
    H2 = build_hamiltonian(VibrationalHamiltonian.from_raw([1.0, 2.0], cubic=[[0, 1, 0, 6.0]]))
    assert H1.allclose(H2, 1e-12)


def test_extract_coeffs():
    harm = build_hamiltonian(VibrationalHamiltonian.from_raw([1000.0]))
    assert not np.any(extract_coeffs(harm, {3, 4}))
    p = BosonPolynomial(1, {mono((2, 2)): 1.0})
    vec = extract_coeffs(p, {4})
    assert np.count_nonzero(vec) == 1 and vec[vec != 0][0] == 1.0


def test_cubic_coefficient_classes():
    v = 2.0
    H = build_hamiltonian(VibrationalHamiltonian.from_raw([0.0], cubic=[[0, 0, 0, v]]))
    cubic = H.select_degrees([3])
    # (b^dag + b)^3 expanded word by word
    s = BosonPolynomial.zero(1)
    for bits in range(8):
        word = [(0, bool(bits >> k & 1)) for k in range(3)]
        s = s + normal_order(word, 1)
    oracle = (v / (2 * math.sqrt(2))) * s.select_degrees([3])
    assert cubic.allclose(oracle, 1e-12)
    assert {m for m in cubic.terms} == {mono((3, 0)), mono((2, 1)), mono((1, 2)), mono((0, 3))}


def test_json_roundtrip():
    h = VibrationalHamiltonian.from_raw([900.0, 1200.0], cubic=[[0, 1, 1, -4.0]],
                                        quartic=[[0, 0, 1, 1, 2.0]])
    h2 = VibrationalHamiltonian.from_json(h.to_json())
    assert build_hamiltonian(h).allclose(build_hamiltonian(h2), 1e-12)
    p = build_hamiltonian(h)
    assert BosonPolynomial.from_json(p.to_json()) == p


tokens = st.lists(st.tuples(st.integers(0, 2), st.booleans()), min_size=0, max_size=6)


@given(tokens)
def test_normal_order_matches_matrix_product(word):
    cutoffs = (3, 3, 3)
    big = tuple(c + len(word) for c in cutoffs)
    p = normal_order(word, 3)
    got = to_matrix(p, FockBasis(cutoffs))
    ref = word_matrix(word, big)
    idx = [FockBasis(big).index(FockBasis(cutoffs).occupations(i)) for i in range(got.shape[0])]
    np.testing.assert_allclose(got, ref[np.ix_(idx, idx)], atol=1e-12)


@given(tokens)
def test_normal_order_idempotent(word):
    p = normal_order(word, 3)
    q = BosonPolynomial.zero(3)
    for m, c in p.terms.items():
        w = []
        for mode, (cr, an) in enumerate(m):
            w += [(mode, True)] * cr
        for mode, (cr, an) in enumerate(m):
            w += [(mode, False)] * an
        q = q + c * normal_order(w, 3)
    assert q == p


polys = st.lists(
    st.tuples(tokens.filter(lambda w: len(w) <= 3), st.floats(-2, 2, allow_nan=False)),
    min_size=1, max_size=3,
).map(lambda items: sum((c * normal_order(w, 3) for w, c in items), BosonPolynomial.zero(3)))


@given(polys, polys, polys)
def test_ring_laws(p, q, r):
    assert ((p * q) * r).allclose(p * (q * r), 1e-12)
    assert (p * (q + r)).allclose(p * q + p * r, 1e-12)


@given(st.lists(st.floats(500, 3000), min_size=1, max_size=3),
       st.lists(st.floats(-30, 30), min_size=3, max_size=3))
def test_build_hamiltonian_hermitian(omega, consts):
    n = len(omega)
    cubic = [[0, 0, n - 1, consts[0]]]
    quartic = [[0, n - 1, n - 1, 0, consts[1]], [n - 1] * 4 + [abs(consts[2])]]
    H = build_hamiltonian(VibrationalHamiltonian.from_raw(omega, cubic, quartic))
    assert H.is_hermitian()
    M = to_matrix(H, FockBasis.uniform(n, 4))
    assert np.max(np.abs(M - M.conj().T)) < 1e-12
