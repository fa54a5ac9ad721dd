"""Greedy decomposition into Bogoliubov-rotated quartic fragments.

Each quartic fragment is ``sum_pq eta_pq n~_p n~_q`` where ``n~_p`` is the
number operator of the transformed modes ``b~ = U b - V b^dag + gamma``.
Fragments are fitted one at a time to the cubic and quartic coefficients of
what is left of the Hamiltonian; whatever quadratic/linear/constant part
remains at the end forms the quadratic fragment.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.linalg
import scipy.optimize

from .boson_algebra import (
    BosonPolynomial,
    coefficient_layout,
    extract_coeffs,
)
from .bogoliubov import (
    BogoliubovError,
    BogoliubovGenerator,
    BogoliubovTransform,
    QuadraticNormalForm,
    UnstableQuadratic,
    apply_transform,
    diagonalize_quadratic,
    exp_generator,
)

log = logging.getLogger(__name__)

HIGH_DEGREES = (3, 4)
COST_SENTINEL = np.inf


# -- parameter packing ----------------------------------------------------


def n_params(n: int) -> int:
    return n * (n + 1) // 2 + n * (n - 1) // 2 + n * (n + 1) // 2 + n


def unpack(params: np.ndarray, n: int) -> Tuple[np.ndarray, BogoliubovGenerator]:
    """Split ``[eta lower, alpha strict-lower, beta lower, gamma]``."""
    params = np.asarray(params, dtype=float)
    ne = n * (n + 1) // 2
    eta = np.zeros((n, n))
    eta[np.tril_indices(n)] = params[:ne]
    eta = eta + np.tril(eta, -1).T
    return eta, BogoliubovGenerator.from_vector(params[ne:], n)


def pack(eta: np.ndarray, gen: BogoliubovGenerator) -> np.ndarray:
    n = gen.n_modes
    return np.concatenate([np.asarray(eta)[np.tril_indices(n)], gen.to_vector()])


# -- fragments ------------------------------------------------------------


def diagonal_quartic(eta: np.ndarray) -> BosonPolynomial:
    """``sum_pq eta_pq n_p n_q`` in the original modes."""
    eta = np.asarray(eta, dtype=float)
    n = eta.shape[0]
    nums = [BosonPolynomial.number(n, p) for p in range(n)]
    out = BosonPolynomial.zero(n)
    for p in range(n):
        for q in range(n):
            if eta[p, q] != 0.0:
                out = out + nums[p] * nums[q] * float(eta[p, q])
    return out


@dataclass(frozen=True, eq=False)
class QuarticFragment:
    eta: np.ndarray
    generator: BogoliubovGenerator
    transform: BogoliubovTransform
    poly: BosonPolynomial

    @classmethod
    def from_params(cls, eta: np.ndarray, gen: BogoliubovGenerator) -> "QuarticFragment":
        eta = np.asarray(eta, dtype=float)
        eta = 0.5 * (eta + eta.T)
        t = exp_generator(gen)
        return cls(eta, gen, t, apply_transform(t, diagonal_quartic(eta)))

    @property
    def n_modes(self) -> int:
        return self.eta.shape[0]

    def solvability_error(self) -> float:
        """Distance between the stored polynomial and a fresh re-expansion."""
        return apply_transform(self.transform, diagonal_quartic(self.eta)).distance(self.poly)

    def to_json(self) -> dict:
        return {
            "kind": "quartic",
            "eta": self.eta.tolist(),
            "generator": self.generator.to_json(),
            "transform": self.transform.to_json(),
        }

    @classmethod
    def from_json(cls, data: dict) -> "QuarticFragment":
        return cls.from_params(np.array(data["eta"]), BogoliubovGenerator.from_json(data["generator"]))


# -- fast cubic+quartic coefficients --------------------------------------


@lru_cache(maxsize=None)
def _scatter_ids(n: int):
    """Map every index tuple over the 2n ladder variables to its monomial slot.

    Variables ``0..n-1`` are ``b_q``, ``n..2n-1`` are ``b_q^dag``.  Cubic and
    quartic parts of a product of (linear + constant) ladder forms depend only
    on the commutative product, because every Wick contraction drops the
    operator degree by two.
    """
    layout = coefficient_layout(n, HIGH_DEGREES)
    slot = {m: i for i, m in enumerate(layout)}
    nv = 2 * n

    def ids_for(order):
        ids = np.empty(nv ** order, dtype=np.intp)
        for flat, idx in enumerate(np.ndindex(*(nv,) * order)):
            cr = [0] * n
            an = [0] * n
            for v in idx:
                if v < n:
                    an[v] += 1
                else:
                    cr[v - n] += 1
            ids[flat] = slot[tuple(zip(cr, an))]
        return ids

    return ids_for(3), ids_for(4), len(layout)


def _forms(U, V):
    # rows: coefficients of b~_p (A) and b~_p^dag (Abar) over [b, b^dag]
    A = np.hstack([U, -V])
    Abar = np.hstack([-V, U])
    return A, Abar


def _pair_tensors(eta, A, Abar, gamma):
    n = eta.shape[0]
    Q = (Abar[:, :, None] * A[:, None, :]).reshape(n, -1)  # n~_p quadratic part
    L = gamma[:, None] * (A + Abar)  # n~_p linear part
    EQ = eta @ Q
    return Q, L, EQ


def fragment_coeffs_from(eta: np.ndarray, U: np.ndarray, V: np.ndarray, gamma: np.ndarray) -> np.ndarray:
    n = eta.shape[0]
    ids3, ids4, size = _scatter_ids(n)
    A, Abar = _forms(U, V)
    Q, L, EQ = _pair_tensors(eta, A, Abar, gamma)
    T4 = Q.T @ EQ
    T3 = 2.0 * (EQ.T @ L)
    out = np.bincount(ids4, weights=T4.ravel(), minlength=size)
    out += np.bincount(ids3, weights=T3.ravel(), minlength=size)
    return out


def params_to_coeffs(params: np.ndarray, n: int) -> np.ndarray:
    eta, gen = unpack(params, n)
    M = scipy.linalg.expm(gen.theta())
    if not np.all(np.isfinite(M)):
        raise BogoliubovError("non-finite exponential")
    return fragment_coeffs_from(eta, M[:n, :n], -M[:n, n:], gen.gamma)


def fragment_to_coeffs(f: QuarticFragment) -> np.ndarray:
    """Cubic+quartic coefficient vector of a fragment in the canonical layout."""
    return fragment_coeffs_from(f.eta, f.transform.U, f.transform.V, f.transform.gamma)


def cost(params: np.ndarray, target: np.ndarray, n: int) -> float:
    try:
        with np.errstate(over="raise", invalid="raise"):
            r = target - params_to_coeffs(params, n)
            c = float(r @ r)
    except (BogoliubovError, FloatingPointError):
        return COST_SENTINEL
    return c if math.isfinite(c) else COST_SENTINEL


def fd_gradient(params: np.ndarray, target: np.ndarray, n: int, rel_step: float = 1e-6) -> np.ndarray:
    params = np.asarray(params, dtype=float)
    g = np.empty_like(params)
    for i in range(params.size):
        h = rel_step * max(1.0, abs(params[i]))
        e = np.zeros_like(params)
        e[i] = h
        g[i] = (cost(params + e, target, n) - cost(params - e, target, n)) / (2 * h)
    return g


def analytic_gradient(params: np.ndarray, target: np.ndarray, n: int) -> Tuple[float, np.ndarray]:
    """Cost and exact gradient (reverse mode through the Frechet derivative of expm)."""
    eta, gen = unpack(params, n)
    theta = gen.theta()
    M = scipy.linalg.expm(theta)
    U, V, gamma = M[:n, :n], -M[:n, n:], gen.gamma
    ids3, ids4, size = _scatter_ids(n)
    A, Abar = _forms(U, V)
    S = A + Abar
    r = target - fragment_coeffs_from(eta, U, V, gamma)
    c = float(r @ r)
    nv = 2 * n
    G4 = (-2.0 * r)[ids4].reshape((nv,) * 4)
    G3 = (-2.0 * r)[ids3].reshape((nv,) * 3)

    d_eta = np.einsum("ijkl,pi,pj,qk,ql->pq", G4, Abar, A, Abar, A, optimize=True)
    d_eta += 2.0 * np.einsum("ijk,pi,pj,q,qk->pq", G3, Abar, A, gamma, S, optimize=True)
    d_Abar = np.einsum("ijkl,pq,pj,qk,ql->pi", G4, eta, A, Abar, A, optimize=True)
    d_Abar += np.einsum("ijkl,pq,pi,pj,ql->qk", G4, eta, Abar, A, A, optimize=True)
    d_A = np.einsum("ijkl,pq,pi,qk,ql->pj", G4, eta, Abar, Abar, A, optimize=True)
    d_A += np.einsum("ijkl,pq,pi,pj,qk->ql", G4, eta, Abar, A, Abar, optimize=True)
    d_Abar += 2.0 * np.einsum("ijk,pq,pj,q,qk->pi", G3, eta, A, gamma, S, optimize=True)
    d_A += 2.0 * np.einsum("ijk,pq,pi,q,qk->pj", G3, eta, Abar, gamma, S, optimize=True)
    d_S = 2.0 * np.einsum("ijk,pq,pi,pj,q->qk", G3, eta, Abar, A, gamma, optimize=True)
    d_gamma = 2.0 * np.einsum("ijk,pq,pi,pj,qk->q", G3, eta, Abar, A, S, optimize=True)
    d_A += d_S
    d_Abar += d_S
    # A = [U, -V], Abar = [-V, U]
    d_U = d_A[:, :n] + d_Abar[:, n:]
    d_V = -d_A[:, n:] - d_Abar[:, :n]
    # U = M[:n,:n], V = -M[:n,n:]
    d_M = np.zeros_like(M)
    d_M[:n, :n] = d_U
    d_M[:n, n:] = -d_V
    d_theta = scipy.linalg.expm_frechet(theta.T, d_M, compute_expm=False)
    # theta = [[alpha, beta], [beta, alpha]] with alpha antisymmetric, beta symmetric
    d_alpha_full = d_theta[:n, :n] + d_theta[n:, n:]
    d_beta_full = d_theta[:n, n:] + d_theta[n:, :n]
    il = np.tril_indices(n, -1)
    d_alpha = d_alpha_full[il] - d_alpha_full.T[il]
    d_beta = _sym_lower_grad(d_beta_full, n)
    d_eta_vec = _sym_lower_grad(d_eta, n)
    return c, np.concatenate([d_eta_vec, d_alpha, d_beta, d_gamma])


def _sym_lower_grad(G: np.ndarray, n: int) -> np.ndarray:
    """Gradient wrt the lower triangle of a symmetric matrix built from it."""
    full = G + G.T
    full[np.diag_indices(n)] = np.diag(G)
    return full[np.tril_indices(n)]


def cost_and_gradient(params, target, n, analytic: bool = False) -> Tuple[float, np.ndarray]:
    """Least-squares cost ``||target - c(params)||^2`` and its gradient."""
    params = np.asarray(params, dtype=float)
    target = np.asarray(target, dtype=float)
    if analytic:
        try:
            with np.errstate(over="raise", invalid="raise"):
                c, g = analytic_gradient(params, target, n)
            if math.isfinite(c) and np.all(np.isfinite(g)):
                return c, g
        except (FloatingPointError, BogoliubovError):
            pass
        return COST_SENTINEL, np.zeros_like(params)
    return cost(params, target, n), fd_gradient(params, target, n)


# -- greedy driver --------------------------------------------------------


@dataclass
class OptimizerOptions:
    method: str = "bfgs"  # or "powell"
    n_restarts: int = 5
    max_evals: int = 10_000
    rel_ftol: float = 1e-10
    max_fragments: int = 20
    analytic_gradient: bool = False
    stagnation_rel: float = 1e-3
    init_scale: float = 0.1
    # trust box for the generator: |alpha|, |beta| <= generator_bound, |gamma| <= displacement_bound
    generator_bound: Optional[float] = 2.0
    displacement_bound: Optional[float] = 5.0
    penalty_weight: float = 1.0

    def __post_init__(self):
        if self.method not in ("bfgs", "powell"):
            raise ValueError(f"unknown optimizer {self.method!r}")


@dataclass
class IterationRecord:
    fragment: int
    restart: int
    cost: float
    evaluations: int
    seconds: float


@dataclass(eq=False)
class FragmentSet:
    """Result of :func:`gfro_decompose`."""

    hamiltonian: BosonPolynomial
    quadratic_poly: BosonPolynomial
    quadratic: Union[QuadraticNormalForm, UnstableQuadratic]
    fragments: List[QuarticFragment]
    discarded: BosonPolynomial
    residual_norm: float
    tol: float
    seed: int
    options: OptimizerOptions
    residual_history: List[float] = field(default_factory=list)
    log: List[IterationRecord] = field(default_factory=list)
    evaluations: int = 0
    converged: bool = True
    diagnostic: str = ""

    @property
    def n_modes(self) -> int:
        return self.hamiltonian.n_modes

    @property
    def n_quartic(self) -> int:
        return len(self.fragments)

    @property
    def n_fragments(self) -> int:
        """Quartic fragments plus the quadratic fragment."""
        return len(self.fragments) + 1

    def polynomials(self) -> List[BosonPolynomial]:
        """Fragment polynomials in Trotter order (quadratic first)."""
        return [self.quadratic_poly] + [f.poly for f in self.fragments]

    def reconstruction_error(self) -> float:
        """Norm of sum(fragments) + discarded - H, summed exactly per monomial."""
        parts = self.polynomials() + [self.discarded, -1.0 * self.hamiltonian]
        return exact_sum(parts).norm()

    def to_json(self) -> dict:
        q = self.quadratic
        if q.stable:
            quad = {"kind": "quadratic", "stable": True, "eps": q.eps.tolist(), "K": q.K,
                    "transform": q.transform.to_json()}
        else:
            quad = {"kind": "quadratic", "stable": False, "reason": q.reason,
                    "kx_eigenvalues": q.kx_eigenvalues.tolist(),
                    "kp_eigenvalues": q.kp_eigenvalues.tolist()}
        quad["polynomial"] = self.quadratic_poly.to_json()
        return {
            "n_modes": self.n_modes,
            "units": "cm-1",
            "tol": self.tol,
            "seed": self.seed,
            "optimizer": self.options.method,
            "n_fragments": self.n_fragments,
            "residual_norm": self.residual_norm,
            "converged": self.converged,
            "diagnostic": self.diagnostic,
            "hamiltonian": self.hamiltonian.to_json(),
            "fragments": [quad] + [f.to_json() for f in self.fragments],
            "residual_history": self.residual_history,
            "iteration_log": [{k: v for k, v in vars(r).items() if k != "seconds"} for r in self.log],
            "evaluations": self.evaluations,
        }

    @classmethod
    def from_json(cls, data: dict) -> "FragmentSet":
        H = BosonPolynomial.from_json(data["hamiltonian"])
        quad_data, *rest = data["fragments"]
        frags = [QuarticFragment.from_json(d) for d in rest]
        qpoly = BosonPolynomial.from_json(quad_data["polynomial"])
        discarded = H
        for p in [qpoly] + [f.poly for f in frags]:
            discarded = discarded - p
        return cls(
            hamiltonian=H,
            quadratic_poly=qpoly,
            quadratic=diagonalize_quadratic(qpoly),
            fragments=frags,
            discarded=discarded,
            residual_norm=float(data["residual_norm"]),
            tol=float(data["tol"]),
            seed=int(data["seed"]),
            options=OptimizerOptions(method=data.get("optimizer", "bfgs")),
            residual_history=list(data.get("residual_history", [])),
            converged=bool(data.get("converged", True)),
            diagnostic=data.get("diagnostic", ""),
        )


def exact_sum(polys: Sequence[BosonPolynomial]) -> BosonPolynomial:
    """Correctly rounded coefficient-wise sum (fragment coefficients can be large)."""
    acc: Dict = {}
    for p in polys:
        for m, c in p.terms.items():
            acc.setdefault(m, []).append(c)
    return BosonPolynomial(polys[0].n_modes, {m: math.fsum(v) for m, v in acc.items()})


class _Counter:
    def __init__(self, fun):
        self.fun = fun
        self.calls = 0

    def __call__(self, *args):
        self.calls += 1
        return self.fun(*args)


class _RelativeStop(Exception):
    pass


def _box(n: int, opts: OptimizerOptions) -> Optional[np.ndarray]:
    if opts.generator_bound is None and opts.displacement_bound is None:
        return None
    ne = n * (n + 1) // 2
    bounds = np.full(n_params(n), np.inf)
    if opts.generator_bound is not None:
        bounds[ne:n_params(n) - n] = opts.generator_bound
    if opts.displacement_bound is not None:
        bounds[n_params(n) - n:] = opts.displacement_bound
    return bounds


def box_penalty(x: np.ndarray, bounds: Optional[np.ndarray], weight: float) -> Tuple[float, np.ndarray]:
    """``weight * sum(max(0, |x| - bound)^2)`` and its gradient; zero inside the box."""
    if bounds is None:
        return 0.0, np.zeros_like(x)
    over = np.maximum(np.abs(x) - bounds, 0.0)
    return float(weight * over @ over), 2.0 * weight * over * np.sign(x)


def _minimize(x0, target, n, opts: OptimizerOptions):
    """Minimize the fragment cost (scaled by the target norm) plus the box penalty.

    Returns the parameters, their exact unpenalized cost and the evaluation count.
    """
    scale = float(target @ target) or 1.0
    bounds = _box(n, opts)
    fun = _Counter(lambda x: cost(x, target, n) / scale + box_penalty(x, bounds, opts.penalty_weight)[0])
    if opts.method == "powell":
        res = scipy.optimize.minimize(
            fun, x0, method="Powell",
            options={"ftol": opts.rel_ftol, "xtol": 1e-12, "maxfev": opts.max_evals},
        )
        return res.x, cost(res.x, target, n), fun.calls

    def fun_grad(x):
        c, g = cost_and_gradient(x, target, n, analytic=opts.analytic_gradient)
        fun.calls += 1 if opts.analytic_gradient else 1 + 2 * x.size
        pc, pg = box_penalty(x, bounds, opts.penalty_weight)
        return c / scale + pc, g / scale + pg

    last = {"f": None}
    best = {"x": np.array(x0, dtype=float), "f": np.inf}

    def callback(intermediate_result):
        f = float(intermediate_result.fun)
        if f < best["f"]:
            best["x"], best["f"] = np.array(intermediate_result.x), f
        prev = last["f"]
        last["f"] = f
        if prev is not None and prev - f <= opts.rel_ftol * max(abs(prev), 1e-300):
            raise StopIteration
        if fun.calls >= opts.max_evals:
            raise StopIteration

    res = scipy.optimize.minimize(
        fun_grad, x0, jac=True, method="BFGS", callback=callback,
        options={"gtol": 1e-14, "maxiter": opts.max_evals},
    )
    x = res.x if res.fun <= best["f"] else best["x"]
    return x, cost(x, target, n), fun.calls


def _initial_params(rng: np.random.Generator, n: int, resid_norm: float, opts: OptimizerOptions):
    ne = n * (n + 1) // 2
    r = resid_norm / n ** 2
    eta = rng.uniform(-r, r, ne)
    rest = rng.uniform(-opts.init_scale, opts.init_scale, n_params(n) - ne)
    return np.concatenate([eta, rest])


def gfro_decompose(
    H: BosonPolynomial,
    tol: float,
    opts: Optional[OptimizerOptions] = None,
    seed: int = 0,
) -> FragmentSet:
    """Greedy fragmentation of ``H`` down to a cubic+quartic residual below ``tol``."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    if H.degree > 4:
        raise ValueError("Hamiltonian degree exceeds 4")
    if H.hermiticity_defect() > 1e-10:
        raise ValueError("Hamiltonian is not Hermitian")
    opts = opts or OptimizerOptions()
    n = H.n_modes
    rng = np.random.default_rng(seed)
    residual = H
    target = extract_coeffs(residual, HIGH_DEGREES)
    norm = float(np.linalg.norm(target))
    history = [norm]
    records: List[IterationRecord] = []
    frags: List[QuarticFragment] = []
    total_evals = 0
    converged = True
    diagnostic = ""

    while norm >= tol:
        if len(frags) >= opts.max_fragments:
            converged = False
            diagnostic = f"reached max_fragments={opts.max_fragments} with residual {norm:.3e}"
            break
        best_x, best_c = None, np.inf
        for restart in range(opts.n_restarts):
            t0 = time.perf_counter()
            x0 = _initial_params(rng, n, norm, opts)
            x, c, calls = _minimize(x0, target, n, opts)
            total_evals += calls
            records.append(IterationRecord(len(frags) + 1, restart, c, calls, time.perf_counter() - t0))
            log.debug("fragment %d restart %d: residual %.6g (%d evals)",
                      len(frags) + 1, restart, math.sqrt(c), calls)
            if c < best_c:
                best_x, best_c = x, c
            if math.sqrt(best_c) < tol:
                break
        new_norm = math.sqrt(best_c)
        if not new_norm < norm * (1.0 - opts.stagnation_rel):
            converged = False
            diagnostic = (f"optimizer stagnated at residual {norm:.6g} "
                          f"(best candidate {new_norm:.6g}) after {opts.n_restarts} restarts")
            log.warning(diagnostic)
            break
        eta, gen = unpack(best_x, n)
        frag = QuarticFragment.from_params(eta, gen)
        frags.append(frag)
        residual = exact_sum([H] + [-1.0 * f.poly for f in frags])
        target = extract_coeffs(residual, HIGH_DEGREES)
        norm = float(np.linalg.norm(target))
        history.append(norm)
        log.info("accepted fragment %d, residual %.6g", len(frags), norm)

    discarded = residual.select_degrees(HIGH_DEGREES)
    quad_poly = residual.select_degrees((0, 1, 2))
    return FragmentSet(
        hamiltonian=H,
        quadratic_poly=quad_poly,
        quadratic=diagonalize_quadratic(quad_poly),
        fragments=frags,
        discarded=discarded,
        residual_norm=norm,
        tol=tol,
        seed=seed,
        options=opts,
        residual_history=history,
        log=records,
        evaluations=total_evals,
        converged=converged,
        diagnostic=diagnostic,
    )
