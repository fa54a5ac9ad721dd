import itertools
import json
import math

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings, strategies as st

from bosefrag.bogoliubov import (BogoliubovGenerator, BogoliubovTransform, diagonalize_quadratic,
                                 exp_generator)
from bosefrag.boson_algebra import HARTREE_TO_CM, BosonPolynomial
from bosefrag.fock_sim import FockBasis, to_matrix
from bosefrag.fragmentation import QuarticFragment
from bosefrag.gate_compiler import (CompileError, Gate, GateCircuit, block_distance,
                                    circuit_to_matrix, compile_bogoliubov,
                                    compile_diagonal_quadratic, compile_diagonal_quartic,
                                    compile_fragment_step, givens_layer, layer_mode_matrix,
                                    verification_limit, verify_fragment_step)

from conftest import ladder_matrix


def random_orthogonal(rng, n, det=None):
    Q, R = np.linalg.qr(rng.normal(size=(n, n)))
    Q = Q @ np.diag(np.sign(np.diag(R)))
    if det is not None and np.sign(np.linalg.det(Q)) != det:
        Q[:, 0] *= -1
    return Q


def random_generator(rng, n, scale=0.2, shift=0.4):
    a = rng.uniform(-scale, scale, (n, n))
    b = rng.uniform(-scale, scale, (n, n))
    return BogoliubovGenerator(a - a.T, b + b.T, rng.uniform(-shift, shift, n))


def test_gate_validation():
    with pytest.raises(ValueError):
        Gate("BS", (0, 0), {"theta": 1.0, "phi": 0.0})
    with pytest.raises(ValueError):
        Gate("S", (0, 1), {"zeta": 0.1})
    with pytest.raises(ValueError):
        Gate("R", (0,), {"theta": math.nan})
    with pytest.raises(ValueError):
        Gate("Q", (0,), {})
    with pytest.raises(ValueError):
        GateCircuit(1, [Gate("D", (1,), {"gamma": 0.1})])


def test_circuit_json_schema():
    c = GateCircuit(2, [Gate("BS", (0, 1), {"theta": 0.3, "phi": math.pi / 2}),
                        Gate("Kerr", (1,), {"kappa": 1e-3})], 0.25, {"t": 1.0})
    d = json.loads(json.dumps(c.to_json()))
    assert d["gates"][0] == {"kind": "BS", "modes": [0, 1], "theta": 0.3, "phi": math.pi / 2}
    assert set(d) == {"n_modes", "gates", "global_phase", "meta"}
    c2 = GateCircuit.from_json(d)
    assert c2.gates == c.gates and c2.global_phase == 0.25


@pytest.mark.parametrize("n", [2, 3, 4, 5])
@pytest.mark.parametrize("det", [1, -1])
def test_givens_reconstruction(rng, n, det):
    O = random_orthogonal(rng, n, det)
    gates = givens_layer(O)
    np.testing.assert_allclose(layer_mode_matrix(gates, n), O, atol=1e-10)
    assert all(g.kind == "BS" for g in gates) == (det > 0)


def test_log_layer_two_modes_only(rng):
    O = random_orthogonal(rng, 2, -1)
    np.testing.assert_allclose(layer_mode_matrix(givens_layer(O, "log"), 2), O, atol=1e-12)
    with pytest.raises(CompileError):
        givens_layer(random_orthogonal(rng, 3), "log")


def test_identity_and_single_squeeze():
    assert len(compile_bogoliubov(BogoliubovTransform.identity(3))) == 0
    z = 0.4
    c = compile_bogoliubov(exp_generator(BogoliubovGenerator([[0.0]], [[z]], [0.0])))
    assert [g.kind for g in c.gates] == ["S"]
    assert abs(c.gates[0].params["zeta"]) == pytest.approx(z)


def _ub_oracle(gen: BogoliubovGenerator, n_max: int) -> np.ndarray:
    """D(gamma) exp(X) from the quadratic generator built directly on ladder matrices."""
    n = gen.n_modes
    a = ladder_matrix(n_max)
    eye = np.eye(n_max + 1)

    def on(op, p):
        mats = [eye] * n
        mats[p] = op
        out = mats[0]
        for m in mats[1:]:
            out = np.kron(out, m)
        return out

    b = [on(a, p) for p in range(n)]
    X = np.zeros_like(b[0])
    for p in range(n):
        for q in range(n):
            X += gen.alpha[p, q] * b[p].T @ b[q]
            X += 0.5 * gen.beta[p, q] * (b[p].T @ b[q].T - b[p] @ b[q])
    D = np.eye(X.shape[0])
    for p in range(n):
        D = D @ scipy.linalg.expm(gen.gamma[p] * (b[p].T - b[p]))
    return D @ scipy.linalg.expm(X)


def test_compiled_bogoliubov_matches_oracle(rng):
    gen = random_generator(rng, 2, scale=0.15, shift=0.3)
    t = exp_generator(gen)
    c = compile_bogoliubov(t)
    basis = FockBasis((24, 24))
    C = circuit_to_matrix(c, basis)
    ref = _ub_oracle(gen, 24)
    # up to the global phase carried by the displacement ordering
    low = basis.total_block(6)
    ov = np.vdot(ref[:, low].ravel(), C[:, low].ravel())
    phase = ov / abs(ov)
    assert block_distance(C, phase * ref, basis, 6) < 1e-6


def test_compiled_bogoliubov_heisenberg_action(rng):
    t = exp_generator(random_generator(rng, 2, scale=0.15, shift=0.3))
    basis = FockBasis((24, 24))
    C = circuit_to_matrix(compile_bogoliubov(t), basis)
    a = ladder_matrix(24)
    b = [np.kron(a, np.eye(25)), np.kron(np.eye(25), a)]
    low = basis.total_block(6)
    for p in range(2):
        lhs = C.conj().T @ b[p] @ C
        rhs = sum(t.U[p, q] * b[q] - t.V[p, q] * b[q].T for q in range(2)) + t.gamma[p] * np.eye(625)
        assert np.linalg.norm((lhs - rhs)[np.ix_(low, low)]) < 1e-6


def test_diagonal_quadratic():
    c = compile_diagonal_quadratic([0.0], 0.0, 1.0)
    assert len(c) == 0 and c.global_phase == 0.0
    w, K, t = 1800.0, 250.0, 3.0
    c = compile_diagonal_quadratic([w], K, t)
    basis = FockBasis((6,))
    M = circuit_to_matrix(c, basis)
    s = t / HARTREE_TO_CM
    np.testing.assert_allclose(np.diag(M), np.exp(-1j * (w * np.arange(7) + K) * s), atol=1e-14)
    assert M[0, 0] == pytest.approx(np.exp(-1j * K * s))


def test_diagonal_quartic(rng):
    assert len(compile_diagonal_quartic(np.zeros((2, 2)), 1.0)) == 0
    h, t = 40.0, 2.0
    M = circuit_to_matrix(compile_diagonal_quartic(np.array([[h]]), t), FockBasis((5,)))
    np.testing.assert_allclose(np.diag(M), np.exp(-1j * h * np.arange(6) ** 2 * t / HARTREE_TO_CM))
    e = rng.uniform(-50, 50, (2, 2))
    eta = e + e.T
    basis = FockBasis((5, 5))
    c = compile_diagonal_quartic(eta, t)
    n = [BosonPolynomial.number(2, p) for p in range(2)]
    D = sum((eta[p, q] * n[p] * n[q] for p in range(2) for q in range(2)), BosonPolynomial.zero(2))
    ref = np.diag(np.exp(-1j * np.diag(to_matrix(D, basis)) * t / HARTREE_TO_CM))
    np.testing.assert_allclose(circuit_to_matrix(c, basis), ref, atol=1e-12)
    # all gates commute: every ordering gives the same matrix
    for perm in itertools.permutations(c.gates):
        M = circuit_to_matrix(GateCircuit(2, list(perm)), basis)
        np.testing.assert_allclose(M, ref, atol=1e-12)
    with pytest.raises(ValueError):
        compile_diagonal_quartic(np.array([[1.0, 2.0], [0.0, 1.0]]), 1.0)


def test_displacement_inverse():
    basis = FockBasis((40,))
    c = GateCircuit(1, [Gate("D", (0,), {"gamma": 0.8}), Gate("D", (0,), {"gamma": -0.8})])
    M = circuit_to_matrix(c, basis)
    assert block_distance(M, np.eye(basis.dim), basis, 20) < 1e-10


def test_beamsplitter_swap():
    basis = FockBasis((3, 3))
    c = GateCircuit(2, [Gate("BS", (0, 1), {"theta": math.pi, "phi": math.pi / 2})])
    M = circuit_to_matrix(c, basis)
    out = M @ basis.basis_state((1, 0))
    assert abs(out[basis.index((0, 1))]) == pytest.approx(1.0)
    out = M @ basis.basis_state((0, 1))
    assert abs(out[basis.index((1, 0))]) == pytest.approx(1.0)
    out = M @ basis.basis_state((2, 1))
    assert abs(out[basis.index((1, 2))]) == pytest.approx(1.0)


def test_empty_circuit_is_identity():
    basis = FockBasis((3, 2))
    np.testing.assert_array_equal(circuit_to_matrix(GateCircuit(2), basis), np.eye(basis.dim))
    with pytest.raises(ValueError):
        circuit_to_matrix(GateCircuit(2), FockBasis((70, 70)))


def test_inverse_property(rng):
    t = exp_generator(random_generator(rng, 2, scale=0.1))
    c = compile_bogoliubov(t)
    basis = FockBasis((30, 30))
    M = circuit_to_matrix(c.then(c.inverse()), basis)
    limit = verification_limit(c, basis)
    assert limit >= 2
    assert block_distance(M, np.eye(basis.dim), basis, limit) < 1e-8
    assert c.inverse().inverse().gates == c.gates


def test_identity_transform_fragment_is_diagonal_only():
    f = QuarticFragment.from_params(np.array([[5.0]]), BogoliubovGenerator.zeros(1))
    c = compile_fragment_step(f, 1.0)
    assert [g.kind for g in c.gates] == ["Kerr"]


def test_unstable_quadratic_refused():
    q = BosonPolynomial.position(1, 0)
    nf = diagonalize_quadratic(500.0 * BosonPolynomial.momentum_squared(1, 0) - 100.0 * q * q)
    with pytest.raises(CompileError):
        compile_fragment_step(nf, 1.0)


def test_compiled_unitary_on_block(rng):
    t = exp_generator(random_generator(rng, 2, scale=0.1))
    c = compile_bogoliubov(t)
    basis = FockBasis((30, 30))
    M = circuit_to_matrix(c, basis)
    idx = basis.total_block(verification_limit(c, basis))
    G = M[:, idx].conj().T @ M[:, idx]
    assert np.linalg.norm(G - np.eye(idx.size)) < 1e-8


def test_quadratic_fragment_step(rng):
    q = [BosonPolynomial.position(2, p) for p in range(2)]
    p2 = [BosonPolynomial.momentum_squared(2, p) for p in range(2)]
    H = 0.5 * (1000.0 * (p2[0] + q[0] * q[0]) + 1300.0 * (p2[1] + q[1] * q[1])) \
        + 150.0 * q[0] * q[1] + 80.0 * q[0]
    nf = diagonalize_quadratic(H)
    dist, n_states, _ = verify_fragment_step(nf, 5.0, FockBasis((28, 28)))
    assert n_states > 0 and dist < 1e-6


@settings(max_examples=8)
@given(st.integers(0, 2 ** 32 - 1), st.integers(1, 2))
def test_fragment_step_equivalence(seed, n):
    rng = np.random.default_rng(seed)
    gen = random_generator(rng, n, scale=0.1, shift=0.3)
    eta = rng.uniform(-50, 50, (n, n))
    f = QuarticFragment.from_params(eta + eta.T, gen)
    basis = FockBasis((40,) if n == 1 else (30, 30))
    dist, n_states, _ = verify_fragment_step(f, 10.0, basis)
    assert n_states > 0
    assert dist < 1e-6
