"""Real Bogoliubov transforms and quadratic Hamiltonian diagonalization.

Conventions
-----------
A transform maps ladder operators as

    b~ = U b - V b^dag + gamma,      b~^dag = U b^dag - V b + gamma

with real ``U``, ``V`` and ``gamma``.  The symplectic matrix acting on
``xi = (b, b^dag)`` is ``M = [[U, -V], [-V, U]]``.  The unitary implementing it
is ``D(gamma) exp(X)`` with the anti-Hermitian generator

    X = sum_pq alpha_pq b_p^dag b_q + 1/2 sum_pq beta_pq (b_p^dag b_q^dag - b_p b_q),

so that ``M = expm([[alpha, beta], [beta, alpha]])``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Union

import numpy as np
import scipy.linalg

from .boson_algebra import BosonPolynomial, monomial_degree

SYMPLECTIC_TOL = 1e-10
RECONSTRUCTION_TOL = 1e-8


class BogoliubovError(ValueError):
    """Raised when a transform cannot be built, inverted or factorized."""


def _tril_size(n, strict=False):
    return n * (n - 1) // 2 if strict else n * (n + 1) // 2


@dataclass(frozen=True, eq=False)
class BogoliubovGenerator:
    """Generator parameters (alpha antisymmetric, beta symmetric, gamma displacement)."""

    alpha: np.ndarray
    beta: np.ndarray
    gamma: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.alpha, dtype=float)
        b = np.asarray(self.beta, dtype=float)
        g = np.asarray(self.gamma, dtype=float).reshape(-1)
        n = g.size
        if a.shape != (n, n) or b.shape != (n, n):
            raise ValueError("alpha/beta must be n x n with n = len(gamma)")
        # rebuild from triangles so the symmetry holds bit-for-bit
        lo = np.tril(a, -1)
        a = lo - lo.T
        bl = np.tril(b)
        b = bl + np.tril(b, -1).T
        object.__setattr__(self, "alpha", a)
        object.__setattr__(self, "beta", b)
        object.__setattr__(self, "gamma", g)

    @property
    def n_modes(self) -> int:
        return self.gamma.size

    @classmethod
    def zeros(cls, n: int) -> "BogoliubovGenerator":
        return cls(np.zeros((n, n)), np.zeros((n, n)), np.zeros(n))

    @classmethod
    def from_vector(cls, vec: np.ndarray, n: int) -> "BogoliubovGenerator":
        """Unpack ``[alpha strict-lower, beta lower, gamma]``."""
        vec = np.asarray(vec, dtype=float)
        na, nb = _tril_size(n, True), _tril_size(n)
        if vec.size != na + nb + n:
            raise ValueError("generator vector has wrong length")
        alpha = np.zeros((n, n))
        alpha[np.tril_indices(n, -1)] = vec[:na]
        beta = np.zeros((n, n))
        beta[np.tril_indices(n)] = vec[na:na + nb]
        return cls(alpha, beta, vec[na + nb:])

    def to_vector(self) -> np.ndarray:
        n = self.n_modes
        return np.concatenate(
            [self.alpha[np.tril_indices(n, -1)], self.beta[np.tril_indices(n)], self.gamma]
        )

    def theta(self) -> np.ndarray:
        return np.block([[self.alpha, self.beta], [self.beta, self.alpha]])

    def to_json(self) -> dict:
        n = self.n_modes
        return {
            "alpha": self.alpha[np.tril_indices(n, -1)].tolist(),
            "beta": self.beta[np.tril_indices(n)].tolist(),
            "gamma": self.gamma.tolist(),
        }

    @classmethod
    def from_json(cls, data: dict) -> "BogoliubovGenerator":
        n = len(data["gamma"])
        return cls.from_vector(np.concatenate([data["alpha"], data["beta"], data["gamma"]]), n)


@dataclass(frozen=True, eq=False)
class BogoliubovTransform:
    """Blocks ``U``, ``V`` and displacement ``gamma`` of a real Bogoliubov map."""

    U: np.ndarray
    V: np.ndarray
    gamma: np.ndarray

    def __post_init__(self):
        U = np.asarray(self.U, dtype=float)
        V = np.asarray(self.V, dtype=float)
        g = np.asarray(self.gamma, dtype=float).reshape(-1)
        n = g.size
        if U.shape != (n, n) or V.shape != (n, n):
            raise ValueError("U/V must be n x n with n = len(gamma)")
        object.__setattr__(self, "U", U)
        object.__setattr__(self, "V", V)
        object.__setattr__(self, "gamma", g)

    @property
    def n_modes(self) -> int:
        return self.gamma.size

    @classmethod
    def identity(cls, n: int) -> "BogoliubovTransform":
        return cls(np.eye(n), np.zeros((n, n)), np.zeros(n))

    @property
    def M(self) -> np.ndarray:
        return np.block([[self.U, -self.V], [-self.V, self.U]])

    def symplectic_error(self) -> float:
        n = self.n_modes
        e1 = np.linalg.norm(self.U @ self.V.T - self.V @ self.U.T)
        e2 = np.linalg.norm(self.U @ self.U.T - self.V @ self.V.T - np.eye(n))
        return max(e1, e2)

    def is_symplectic(self, tol: float = SYMPLECTIC_TOL) -> bool:
        return self.symplectic_error() <= tol

    def is_identity(self, tol: float = 1e-14) -> bool:
        n = self.n_modes
        return (
            np.abs(self.U - np.eye(n)).max() <= tol
            and np.abs(self.V).max(initial=0.0) <= tol
            and np.abs(self.gamma).max(initial=0.0) <= tol
        )

    def compose(self, inner: "BogoliubovTransform") -> "BogoliubovTransform":
        """Transform of the unitary product ``self.unitary @ inner.unitary``.

        With ``G_1^dag b G_1 = M_1 b + g_1`` and likewise for ``G_2``, the
        product ``G_1 G_2`` maps ``b -> M_1 (M_2 b + g_2) + g_1``.
        """
        M = self.M @ inner.M
        n = self.n_modes
        shift = self.U @ inner.gamma - self.V @ inner.gamma + self.gamma
        return BogoliubovTransform(M[:n, :n], -M[:n, n:], shift)

    def to_json(self) -> dict:
        return {"U": self.U.tolist(), "V": self.V.tolist(), "gamma": self.gamma.tolist()}

    @classmethod
    def from_json(cls, data: dict) -> "BogoliubovTransform":
        return cls(np.array(data["U"], dtype=float), np.array(data["V"], dtype=float),
                   np.array(data["gamma"], dtype=float))


def exp_generator(g: BogoliubovGenerator) -> BogoliubovTransform:
    """Exponentiate a generator: ``M = expm(theta)`` (Pade-13 scaling and squaring)."""
    n = g.n_modes
    M = scipy.linalg.expm(g.theta())
    if not np.all(np.isfinite(M)):
        raise BogoliubovError("matrix exponential produced non-finite entries")
    return BogoliubovTransform(M[:n, :n], -M[:n, n:], g.gamma.copy())


def log_transform(t: BogoliubovTransform) -> BogoliubovGenerator:
    """Principal matrix logarithm of ``M``; inverse of :func:`exp_generator`."""
    M = t.M
    ev = np.linalg.eigvals(M)
    on_cut = (np.abs(ev.imag) < 1e-9) & (ev.real <= 0)
    if np.any(on_cut):
        raise BogoliubovError(
            f"M has eigenvalue(s) {ev[on_cut].real} on the non-positive real axis; "
            "no real principal logarithm"
        )
    theta = scipy.linalg.logm(M)
    if np.iscomplexobj(theta):
        if np.abs(theta.imag).max() > 1e-8:
            raise BogoliubovError("logarithm is not real")
        theta = theta.real
    n = t.n_modes
    alpha = 0.5 * (theta[:n, :n] + theta[n:, n:])
    beta = 0.5 * (theta[:n, n:] + theta[n:, :n])
    return BogoliubovGenerator(0.5 * (alpha - alpha.T), 0.5 * (beta + beta.T), t.gamma.copy())


def transformed_ladders(t: BogoliubovTransform):
    """Polynomials for ``b~_p`` and ``b~_p^dag`` in the original modes."""
    n = t.n_modes
    ann = []
    cre = []
    for p in range(n):
        a_terms = {}
        c_terms = {}
        for q in range(n):
            lo = [(0, 0)] * n
            lo[q] = (0, 1)
            hi = [(0, 0)] * n
            hi[q] = (1, 0)
            lo, hi = tuple(lo), tuple(hi)
            a_terms[lo] = a_terms.get(lo, 0.0) + t.U[p, q]
            a_terms[hi] = a_terms.get(hi, 0.0) - t.V[p, q]
            c_terms[hi] = c_terms.get(hi, 0.0) + t.U[p, q]
            c_terms[lo] = c_terms.get(lo, 0.0) - t.V[p, q]
        ident = ((0, 0),) * n
        a_terms[ident] = t.gamma[p]
        c_terms[ident] = t.gamma[p]
        ann.append(BosonPolynomial(n, a_terms))
        cre.append(BosonPolynomial(n, c_terms))
    return ann, cre


def apply_transform(t: BogoliubovTransform, p: BosonPolynomial) -> BosonPolynomial:
    """Substitute the transformed ladder operators into ``p``.

    Returns ``U_b^dag p U_b`` expressed in the original modes, where ``U_b``
    is the unitary implementing ``t``.
    """
    if t.n_modes != p.n_modes:
        raise ValueError("transform and polynomial have different mode counts")
    ann, cre = transformed_ladders(t)
    n = t.n_modes
    one = BosonPolynomial.constant(n, 1.0)

    @lru_cache(maxsize=None)
    def power(p_idx, creation, k):
        if k == 0:
            return one
        base = cre[p_idx] if creation else ann[p_idx]
        return power(p_idx, creation, k - 1) * base

    out = BosonPolynomial.zero(n)
    for mono, coeff in p.terms.items():
        term = BosonPolynomial.constant(n, coeff)
        for mode, (c, _) in enumerate(mono):
            if c:
                term = term * power(mode, True, c)
        for mode, (_, a) in enumerate(mono):
            if a:
                term = term * power(mode, False, a)
        out = out + term
    return out


# -- Bloch-Messiah -------------------------------------------------------


@dataclass(frozen=True, eq=False)
class BlochMessiah:
    """``U = W cosh(zeta) X^T`` and ``V = -W sinh(zeta) X^T`` with orthogonal W, X."""

    W: np.ndarray
    X: np.ndarray
    zeta: np.ndarray

    @property
    def U_D(self):
        return np.cosh(self.zeta)

    @property
    def V_D(self):
        return -np.sinh(self.zeta)

    def reconstruct(self):
        U = self.W @ np.diag(np.cosh(self.zeta)) @ self.X.T
        V = -self.W @ np.diag(np.sinh(self.zeta)) @ self.X.T
        return U, V


def bloch_messiah(t: BogoliubovTransform) -> BlochMessiah:
    """Factor the symplectic part of ``t`` into rotation, squeeze, rotation.

    For real transforms the x-quadrature block ``U - V`` carries everything:
    its SVD ``W diag(e^zeta) X^T`` fixes both orthogonal factors, and the
    p-quadrature block ``U + V`` equals ``(U - V)^{-T}`` by symplecticity, so
    no degenerate-subspace alignment is needed.
    """
    A = t.U - t.V
    W, s, Xt = np.linalg.svd(A)
    if np.any(s <= 0):
        raise BogoliubovError("singular x-quadrature block")
    bm = BlochMessiah(W, Xt.T, np.log(s))
    U, V = bm.reconstruct()
    err = max(np.linalg.norm(U - t.U), np.linalg.norm(V - t.V))
    if err > RECONSTRUCTION_TOL * max(1.0, np.linalg.norm(t.M)):
        raise BogoliubovError(f"Bloch-Messiah reconstruction residual {err:.3e}")
    return bm


# -- quadratic Hamiltonians ----------------------------------------------


@dataclass(frozen=True, eq=False)
class QuadraticNormalForm:
    """``p = U_b^dag (sum_p eps_p n_p + K) U_b`` with positive ``eps``."""

    transform: BogoliubovTransform
    eps: np.ndarray
    K: float

    stable = True

    def diagonal_polynomial(self) -> BosonPolynomial:
        n = self.transform.n_modes
        out = BosonPolynomial.constant(n, self.K)
        for p, e in enumerate(self.eps):
            out = out + BosonPolynomial.number(n, p) * float(e)
        return out

    def polynomial(self) -> BosonPolynomial:
        return apply_transform(self.transform, self.diagonal_polynomial())


@dataclass(frozen=True, eq=False)
class UnstableQuadratic:
    """A quadratic polynomial whose (q, p) form is not positive definite.

    Still usable for simulation by direct exponentiation; gate compilation
    refuses it.
    """

    poly: BosonPolynomial
    kx_eigenvalues: np.ndarray
    kp_eigenvalues: np.ndarray
    reason: str

    stable = False

    def polynomial(self) -> BosonPolynomial:
        return self.poly


def quadratic_form(p: BosonPolynomial):
    """Split a real degree-<=2 polynomial into (q, p) quadratic-form data.

    Returns ``(Kx, Kp, d, c)`` with ``p = 1/2 x^T Kx x + 1/2 p^T Kp p + d.x + c``.
    """
    n = p.n_modes
    A = np.zeros((n, n))
    Bc = np.zeros((n, n))
    Ba = np.zeros((n, n))
    Cc = np.zeros(n)
    Ca = np.zeros(n)
    c0 = 0.0
    for mono, coeff in p.terms.items():
        cr = [i for i, (c, _) in enumerate(mono) for _ in range(c)]
        an = [i for i, (_, a) in enumerate(mono) for _ in range(a)]
        deg = len(cr) + len(an)
        if deg > 2:
            raise ValueError("polynomial has degree > 2")
        if deg == 0:
            c0 += coeff
        elif deg == 1:
            if cr:
                Cc[cr[0]] += coeff
            else:
                Ca[an[0]] += coeff
        elif len(cr) == 1:
            A[cr[0], an[0]] += coeff
        else:
            i, j = cr if cr else an
            target = Bc if cr else Ba
            if i == j:
                target[i, i] += 2.0 * coeff
            else:
                target[i, j] += coeff
                target[j, i] += coeff
    # Hermitian input has equal creation/annihilation parts; average for robustness
    B = 0.5 * (Bc + Ba)
    C = 0.5 * (Cc + Ca)
    A = 0.5 * (A + A.T)
    Kx = A + B
    Kp = A - B
    d = np.sqrt(2.0) * C
    c = c0 - 0.5 * np.trace(A)
    return Kx, Kp, d, c


def diagonalize_quadratic(p: BosonPolynomial) -> Union[QuadraticNormalForm, UnstableQuadratic]:
    """Bring a Hermitian linear-plus-quadratic polynomial to ``sum eps n~ + K``.

    Completes the square in x, then Williamson-diagonalizes the block-diagonal
    (x, p) form via a Cholesky factor of the p-block and an eigen-decomposition.
    """
    if p.degree > 2:
        raise ValueError("diagonalize_quadratic needs a polynomial of degree <= 2")
    Kx, Kp, d, c = quadratic_form(p)
    ex = np.linalg.eigvalsh(Kx)
    ep = np.linalg.eigvalsh(Kp)
    scale = max(1.0, np.abs(ex).max(initial=0.0), np.abs(ep).max(initial=0.0))
    if ex.min() <= 1e-12 * scale or ep.min() <= 1e-12 * scale:
        return UnstableQuadratic(p, ex, ep, "quadratic form is not positive definite")
    n = p.n_modes
    L = np.linalg.cholesky(Kp)
    w2, O = np.linalg.eigh(L.T @ Kx @ L)
    eps = np.sqrt(w2)
    # A_ maps x to the normal coordinates: X~ = A_ (x - x*), P~ = A_^{-T} p
    A_ = np.diag(np.sqrt(eps)) @ O.T @ np.linalg.inv(L)
    A_invT = np.linalg.inv(A_).T
    x_star = -np.linalg.solve(Kx, d)
    U = 0.5 * (A_ + A_invT)
    V = 0.5 * (A_invT - A_)
    gamma = -A_ @ x_star / np.sqrt(2.0)
    K = c - 0.5 * d @ np.linalg.solve(Kx, d) + 0.5 * eps.sum()
    return QuadraticNormalForm(BogoliubovTransform(U, V, gamma), eps, float(K))


def is_quadratic(p: BosonPolynomial) -> bool:
    return all(monomial_degree(m) <= 2 for m in p.terms)
