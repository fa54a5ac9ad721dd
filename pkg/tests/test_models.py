import numpy as np
import pytest

from bosefrag.boson_algebra import BosonPolynomial
from bosefrag.fock_sim import FockBasis, to_matrix
from bosefrag.models import TropoloneModel, build_tropolone, synthetic_quartic


def test_parameters_and_barrier():
    m = TropoloneModel()
    assert m.barrier_height() == pytest.approx(m.omega_x * m.x0 ** 3 / 8, rel=1e-12)
    assert m.barrier_height() == pytest.approx(14042, abs=1)
    assert m.potential(m.x0, 0.0) == 0.0 and m.potential(-m.x0, 0.0) == 0.0
    # the saddle is at y = alpha x0^2, where the bond term vanishes
    ys = np.linspace(-1, 5, 6001)
    assert ys[np.argmin(m.potential(0.0, ys))] == pytest.approx(m.alpha * m.x0 ** 2, abs=1e-3)


def test_invalid_parameters():
    with pytest.raises(ValueError):
        TropoloneModel(omega_x=-1.0)
    with pytest.raises(ValueError):
        TropoloneModel(x0=0.0)


def test_polynomial_structure():
    m = TropoloneModel()
    H = build_tropolone(m)
    assert H.degree == 4
    assert H.hermiticity_defect() < 1e-10
    # x^4 coefficient: b^dag^4 carries c4 / 4 since x = (b + b^dag)/sqrt 2
    assert H.coeff(((4, 0), (0, 0))) == pytest.approx(m.quartic_x_coefficient / 4, rel=1e-12)
    assert m.quartic_x_coefficient == pytest.approx(m.omega_x / (8 * m.x0) + m.omega_y * m.alpha ** 2 / 2)
    assert any(sum(a + b for a, b in mono) == 3 for mono in H.terms)


def test_potential_matches_matrix_oracle():
    # V(x, y) evaluated on truncated position matrices agrees away from the cutoff
    m = TropoloneModel()
    V = build_tropolone(m) - 0.5 * m.omega_x * BosonPolynomial.momentum_squared(2, 0) \
        - 0.5 * m.omega_y * BosonPolynomial.momentum_squared(2, 1)
    basis = FockBasis((24, 24))
    X = to_matrix(BosonPolynomial.position(2, 0), basis)
    Y = to_matrix(BosonPolynomial.position(2, 1), basis)
    eye = np.eye(basis.dim)
    d = X @ X - m.x0 ** 2 * eye
    s = Y + m.alpha * d
    ref = m.omega_x / (8 * m.x0) * d @ d + 0.5 * m.omega_y * s @ s
    low = basis.low_block(4)
    np.testing.assert_allclose(to_matrix(V, basis)[np.ix_(low, low)], ref[np.ix_(low, low)],
                               rtol=1e-12, atol=1e-8)


def test_synthetic_is_reproducible_and_bound():
    a, b = synthetic_quartic(3, 7), synthetic_quartic(3, 7)
    assert a.to_json() == b.to_json()
    assert all(v > 0 for k, v in a.quartic.items() if len(set(k)) == 1)
    with pytest.raises(ValueError):
        synthetic_quartic(0, 1)
