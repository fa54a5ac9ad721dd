"""Truncated Fock-space backend: matrices, propagation and spectra.

Energies are in cm^-1 throughout (the unit of the polynomial coefficients);
times are in atomic units.  Conversion uses :data:`HARTREE_TO_CM`.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass
from functools import lru_cache
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .boson_algebra import HARTREE_TO_CM, BosonPolynomial

log = logging.getLogger(__name__)

DENSE_LIMIT = 4096
MAX_DIM = 10 ** 6
#: 1 atomic unit of time in femtoseconds
AU_TIME_FS = 0.02418884254


class CutoffError(ValueError):
    pass


class SpectrumError(RuntimeError):
    pass


@dataclass(frozen=True)
class FockBasis:
    """Product basis with per-mode occupation cutoffs ``n_max``.

    Flat indices follow C order over ``(n_0, n_1, ...)`` so mode 0 is the
    slowest index, matching ``np.kron(op_0, op_1, ...)``.
    """

    cutoffs: Tuple[int, ...]

    def __post_init__(self):
        cut = tuple(int(c) for c in np.atleast_1d(self.cutoffs))
        if not cut or any(c < 0 for c in cut):
            raise ValueError("cutoffs must be non-negative")
        object.__setattr__(self, "cutoffs", cut)
        if self.dim > MAX_DIM:
            raise CutoffError(f"basis dimension {self.dim} exceeds {MAX_DIM}")

    @classmethod
    def uniform(cls, n_modes: int, n_max: int) -> "FockBasis":
        return cls((n_max,) * n_modes)

    @property
    def n_modes(self) -> int:
        return len(self.cutoffs)

    @property
    def shape(self) -> Tuple[int, ...]:
        return tuple(c + 1 for c in self.cutoffs)

    @property
    def dim(self) -> int:
        return int(np.prod(self.shape))

    def index(self, occupations: Sequence[int]) -> int:
        return int(np.ravel_multi_index(tuple(occupations), self.shape))

    def occupations(self, index: int) -> Tuple[int, ...]:
        return tuple(int(i) for i in np.unravel_index(index, self.shape))

    def low_block(self, buffer: int) -> np.ndarray:
        """Flat indices whose every occupation is ``<= n_max - buffer``."""
        grids = np.indices(self.shape).reshape(self.n_modes, -1)
        limits = np.array(self.cutoffs)[:, None] - buffer
        return np.flatnonzero(np.all(grids <= limits, axis=0))

    def total_block(self, limit: int) -> np.ndarray:
        """Flat indices with total occupation ``sum_p n_p <= limit``."""
        grids = np.indices(self.shape).reshape(self.n_modes, -1)
        return np.flatnonzero(grids.sum(axis=0) <= limit)

    def basis_state(self, occupations: Sequence[int]) -> np.ndarray:
        psi = np.zeros(self.dim, dtype=complex)
        psi[self.index(occupations)] = 1.0
        return psi


@lru_cache(maxsize=None)
def annihilation(n_max: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, n_max + 1, dtype=float)), 1)


@lru_cache(maxsize=None)
def _mode_operator(n_max: int, c: int, a: int) -> np.ndarray:
    """Truncated matrix of b^dag^c b^a (exact projection, being normal ordered)."""
    # <n - a + c| b^dag^c b^a |n> = sqrt(n!/(n-a)! * m!/(m-c)!), m = n - a + c; one sqrt
    # keeps integer diagonals such as n^2 exact
    out = np.zeros((n_max + 1, n_max + 1))
    for n in range(a, n_max + 1):
        m = n - a + c
        if m > n_max:
            break
        out[m, n] = math.sqrt(math.perm(n, a) * math.perm(m, c))
    return out


def _kron_all(mats, sparse):
    out = mats[0]
    for m in mats[1:]:
        out = sp.kron(out, m, format="csr") if sparse else np.kron(out, m)
    return out


def to_matrix(p: BosonPolynomial, basis: FockBasis, sparse: Optional[bool] = None):
    """Matrix of ``p`` projected onto the truncated basis (cm^-1)."""
    if p.n_modes != basis.n_modes:
        raise ValueError("polynomial and basis have different mode counts")
    if sparse is None:
        sparse = basis.dim > DENSE_LIMIT
    if sparse:
        out = sp.csr_matrix((basis.dim, basis.dim))
    else:
        out = np.zeros((basis.dim, basis.dim))
    for mono, coeff in p.terms.items():
        mats = [_mode_operator(nm, c, a) for nm, (c, a) in zip(basis.cutoffs, mono)]
        if sparse:
            mats = [sp.csr_matrix(m) for m in mats]
        out = out + coeff * _kron_all(mats, sparse)
    return out


def mode_operator(op: np.ndarray, mode: int, basis: FockBasis) -> np.ndarray:
    mats = [np.eye(s) for s in basis.shape]
    mats[mode] = op
    return _kron_all(mats, False)


# -- states ---------------------------------------------------------------


def coherent_amplitudes(gamma: float, n_max: int) -> Tuple[np.ndarray, float]:
    """Fock amplitudes of a real coherent state and the probability lost above ``n_max``."""
    n = np.arange(n_max + 1)
    logs = -0.5 * gamma ** 2 + np.where(n > 0, n * np.log(abs(gamma) + 1e-300), 0.0) \
        - 0.5 * np.array([math.lgamma(k + 1) for k in n])
    amps = np.exp(logs) * np.where(n % 2 == 1, np.sign(gamma) if gamma != 0 else 0.0, 1.0)
    if gamma == 0:
        amps = np.zeros(n_max + 1)
        amps[0] = 1.0
    tail = max(0.0, 1.0 - float(amps @ amps))
    return amps, tail


def prepare_displaced_vacuum(basis: FockBasis, displacements: Sequence[float]) -> np.ndarray:
    """Product of coherent states ``D(gamma_p)|0>`` (real ``gamma_p``), normalized."""
    displacements = np.asarray(displacements, dtype=float)
    if displacements.size != basis.n_modes:
        raise ValueError("one displacement per mode required")
    vecs = []
    for g, nm in zip(displacements, basis.cutoffs):
        amps, tail = coherent_amplitudes(float(g), nm)
        if tail > 1e-6:
            raise CutoffError(f"cutoff {nm} loses {tail:.2e} of a coherent state with gamma={g}")
        if tail > 1e-10:
            warnings.warn(f"coherent-state tail mass {tail:.2e} above cutoff {nm}")
        vecs.append(amps)
    psi = vecs[0]
    for v in vecs[1:]:
        psi = np.kron(psi, v)
    return (psi / np.linalg.norm(psi)).astype(complex)


def expectation(op, psi: np.ndarray) -> float:
    return float(np.real(np.vdot(psi, op @ psi)))


def overlap_error(a: np.ndarray, b: np.ndarray) -> float:
    """``1 - |<a|b>|``; immune to global phase."""
    if a.shape != b.shape:
        raise ValueError("states live in different bases")
    return float(1.0 - abs(np.vdot(a, b)))


# -- propagation ----------------------------------------------------------


def _to_au(energy_cm):
    return energy_cm / HARTREE_TO_CM


class Propagator:
    """``exp(-i H t)`` for a Hermitian matrix in cm^-1 and times in a.u.

    Dense matrices are diagonalized once; sparse ones use Krylov
    ``expm_multiply`` per call.
    """

    def __init__(self, H):
        self.H = H
        self.dim = H.shape[0]
        if sp.issparse(H):
            self.evals = None
            self.evecs = None
        else:
            H = np.asarray(H)
            if np.abs(H - H.conj().T).max(initial=0.0) > 1e-9 * max(1.0, np.abs(H).max(initial=0.0)):
                raise ValueError("matrix is not Hermitian")
            try:
                self.evals, self.evecs = scipy.linalg.eigh(H)
            except np.linalg.LinAlgError as exc:
                raise SpectrumError(f"eigensolver failed: {exc}") from exc

    def unitary(self, t: float) -> np.ndarray:
        if self.evals is None:
            raise ValueError("dense unitary unavailable for sparse Hamiltonians")
        phases = np.exp(-1j * _to_au(self.evals) * t)
        return (self.evecs * phases) @ self.evecs.conj().T

    def apply(self, psi: np.ndarray, t: float) -> np.ndarray:
        if self.evals is None:
            return spla.expm_multiply(-1j * _to_au(1.0) * t * self.H, psi)
        phases = np.exp(-1j * _to_au(self.evals) * t)
        if psi.ndim == 2:
            phases = phases[:, None]
        return self.evecs @ (phases * (self.evecs.conj().T @ psi))


_PROP_CACHE: List[Tuple[object, Propagator]] = []


def _propagator_for(H) -> Propagator:
    if isinstance(H, Propagator):
        return H
    for ref, prop in _PROP_CACHE:
        if ref is H:
            return prop
    prop = Propagator(H)
    _PROP_CACHE.append((H, prop))
    del _PROP_CACHE[:-4]
    return prop


def evolve_exact(H, psi0: np.ndarray, t: float) -> np.ndarray:
    """``exp(-i H t) psi0``; the eigendecomposition of ``H`` is cached."""
    return _propagator_for(H).apply(np.asarray(psi0, dtype=complex), t)


def _apply_power(U: np.ndarray, psi: np.ndarray, n: int) -> np.ndarray:
    """``U^n psi`` for a unitary ``U``.

    Short runs multiply directly.  Long ones go through the complex Schur
    form with eigenvalues pinned to the unit circle, so the result stays
    unitary however large ``n`` is (repeated squaring drifts in norm).
    """
    if n <= 0:
        return psi
    if n <= 32:
        for _ in range(n):
            psi = U @ psi
        return psi
    T, Z = scipy.linalg.schur(U, output="complex")
    phases = np.angle(np.diag(T))
    # reduce n * phase modulo 2 pi in two pieces to limit rounding
    hi, lo = divmod(n, 1 << 20)
    turns = np.mod(np.mod(phases * (1 << 20), 2 * np.pi) * hi + phases * lo, 2 * np.pi)
    coeff = np.exp(1j * turns)
    if psi.ndim == 2:
        coeff = coeff[:, None]
    return Z @ (coeff * (Z.conj().T @ psi))


@dataclass
class TrotterResult:
    state: np.ndarray
    n_steps: int
    partial_step: float  # length of the trailing partial step (0 if none)


class TrotterPropagator:
    """First-order product formula over fragment polynomials.

    Each fragment matrix is diagonalized once in the original truncated
    basis; within a step fragment ``k = 0`` acts first.
    """

    def __init__(self, polys: Sequence[BosonPolynomial], basis: FockBasis):
        if basis.dim > DENSE_LIMIT:
            self.props = [Propagator(to_matrix(p, basis, sparse=True)) for p in polys]
        else:
            self.props = [Propagator(to_matrix(p, basis, sparse=False)) for p in polys]
        self.basis = basis

    @classmethod
    def from_fragments(cls, frags, basis: FockBasis) -> "TrotterPropagator":
        return cls(frags.polynomials(), basis)

    def step_matrix(self, dt: float) -> np.ndarray:
        U = np.eye(self.basis.dim, dtype=complex)
        for prop in self.props:
            U = prop.unitary(dt) @ U
        return U

    def step(self, psi: np.ndarray, dt: float) -> np.ndarray:
        for prop in self.props:
            psi = prop.apply(psi, dt)
        return psi

    def evolve(self, psi0: np.ndarray, t_total: float, dt: float) -> TrotterResult:
        if dt <= 0 or t_total < 0:
            raise ValueError("need dt > 0 and t_total >= 0")
        n = int(math.floor(t_total / dt * (1 + 1e-12)))
        rem = t_total - n * dt
        if abs(rem) <= 1e-12 * max(1.0, t_total):
            rem = 0.0
        psi = np.asarray(psi0, dtype=complex)
        if self.props[0].evals is not None and n > 1:
            psi = _apply_power(self.step_matrix(dt), psi, n)
        else:
            for _ in range(n):
                psi = self.step(psi, dt)
        if rem > 0:
            log.info("trailing partial Trotter step of %.6g a.u.", rem)
            psi = self.step(psi, rem)
        return TrotterResult(psi, n, rem)


def evolve_trotter(frags, basis: FockBasis, psi0: np.ndarray, t_total: float, dt: float) -> TrotterResult:
    """Trotterized propagation over a :class:`FragmentSet` (or list of polynomials)."""
    polys = frags if isinstance(frags, (list, tuple)) else frags.polynomials()
    return TrotterPropagator(polys, basis).evolve(psi0, t_total, dt)


# -- spectra --------------------------------------------------------------


def lowest_eigenpairs(H, k: int):
    if sp.issparse(H):
        vals, vecs = spla.eigsh(H, k=k, which="SA")
        order = np.argsort(vals)
        return vals[order], vecs[:, order]
    vals, vecs = scipy.linalg.eigh(np.asarray(H), subset_by_index=[0, k - 1])
    return vals, vecs


def tunneling_period(H) -> float:
    """``2 pi / (E1 - E0)`` in a.u. for ``H`` in cm^-1."""
    if H.shape[0] < 2:
        raise ValueError("need at least two levels")
    vals, _ = lowest_eigenpairs(H, 2)
    gap = vals[1] - vals[0]
    if gap <= 1e-12 * max(1.0, abs(vals[0])):
        raise SpectrumError("lowest two levels are degenerate")
    return 2 * math.pi / _to_au(gap)


@dataclass
class HeffSpectrum:
    exact: np.ndarray
    heff: np.ndarray
    overlaps: np.ndarray

    @property
    def difference(self) -> np.ndarray:
        return self.heff - self.exact


def _group_degenerate(vals, tol):
    groups = []
    start = 0
    for i in range(1, len(vals) + 1):
        if i == len(vals) or vals[i] - vals[i - 1] > tol:
            groups.append(list(range(start, i)))
            start = i
    return groups


def heff_eigenvalues(frags, basis: FockBasis, t: float = 1.0, n_levels: int = 4,
                     hamiltonian: Optional[BosonPolynomial] = None) -> HeffSpectrum:
    """Eigenenergies (cm^-1) of the one-step Trotter unitary at time ``t`` (a.u.).

    Trotter eigenvectors are matched to exact eigenvectors by maximal overlap
    (projection weight onto a degenerate exact subspace, where needed); the
    energies come from the eigenphases in (-pi, pi].
    """
    H_poly = hamiltonian if hamiltonian is not None else frags.hamiltonian
    polys = frags if isinstance(frags, (list, tuple)) else frags.polynomials()
    H = to_matrix(H_poly, basis)
    n_exact = min(basis.dim, n_levels + 4)
    if basis.dim <= n_levels:
        raise ValueError("basis too small for the requested levels")
    exact_vals, exact_vecs = lowest_eigenpairs(H, n_exact)

    span = _to_au(exact_vals[n_levels - 1]) * t
    if abs(span) >= math.pi or abs(_to_au(exact_vals[0]) * t) >= math.pi:
        raise SpectrumError(f"t={t} a.u. puts the lowest levels outside the principal phase branch")

    trotter = TrotterPropagator(polys, basis)
    if basis.dim <= DENSE_LIMIT:
        lam, vecs = scipy.linalg.eig(trotter.step_matrix(t))
    else:
        lam, vecs = _ritz_unitary(trotter, exact_vecs, t)
    vecs = vecs / np.linalg.norm(vecs, axis=0)
    energies = -np.angle(lam) / t * HARTREE_TO_CM

    degeneracy_tol = 1e-8 * max(1.0, abs(exact_vals[n_levels - 1]))
    groups = _group_degenerate(exact_vals, degeneracy_tol)
    used = set()
    heff = np.empty(n_levels)
    weights = np.empty(n_levels)
    for g in groups:
        if g[0] >= n_levels:
            break
        proj = np.sum(np.abs(exact_vecs[:, g].conj().T @ vecs) ** 2, axis=0)
        order = [j for j in np.argsort(-proj) if j not in used][: len(g)]
        picked = sorted(order, key=lambda j: energies[j])
        for lvl, j in zip(g, picked):
            if lvl >= n_levels:
                break
            used.add(j)
            heff[lvl] = energies[j]
            weights[lvl] = proj[j]
    if weights.min() < 0.5:
        raise SpectrumError(f"ambiguous eigenvector matching (min weight {weights.min():.3f})")
    return HeffSpectrum(exact_vals[:n_levels], np.sort(heff), weights)


def _ritz_unitary(trotter: TrotterPropagator, guess: np.ndarray, t: float, iters: int = 20):
    """Rayleigh-Ritz eigenpairs of the Trotter step on a subspace seeded by exact eigenvectors."""
    Q, _ = np.linalg.qr(guess.astype(complex))
    for _ in range(iters):
        Z = np.column_stack([trotter.step(Q[:, j], t) for j in range(Q.shape[1])])
        small = Q.conj().T @ Z
        lam, y = np.linalg.eig(small)
        Q, _ = np.linalg.qr(Z)
    return lam, guess.astype(complex) @ y


# -- observables ----------------------------------------------------------


def position_matrix(basis: FockBasis, mode: int) -> np.ndarray:
    b = annihilation(basis.cutoffs[mode])
    return mode_operator((b + b.T) / math.sqrt(2.0), mode, basis)


def left_well_projector(basis: FockBasis, mode: int = 0) -> np.ndarray:
    """Projector onto x < 0 for ``mode`` via the eigenbasis of the truncated x (DVR)."""
    b = annihilation(basis.cutoffs[mode])
    xv, xvecs = np.linalg.eigh((b + b.T) / math.sqrt(2.0))
    left = xvecs[:, xv < 0]
    return mode_operator(left @ left.T, mode, basis)


# -- drivers --------------------------------------------------------------


@dataclass
class Trajectory:
    times: np.ndarray
    x_exact: np.ndarray  # (n_times, n_modes)
    x_trotter: np.ndarray
    left_exact: np.ndarray
    left_trotter: np.ndarray
    overlap_error: np.ndarray


def simulate_trajectory(H_poly: BosonPolynomial, polys: Sequence[BosonPolynomial], basis: FockBasis,
                        psi0: np.ndarray, t_total: float, dt: float, n_samples: int = 100) -> Trajectory:
    """Exact and Trotterized propagation sampled on a uniform time grid.

    Samples fall on whole Trotter steps: the sampling interval is rounded to
    a multiple of ``dt``.
    """
    n_steps = max(1, int(round(t_total / dt)))
    stride = max(1, n_steps // max(1, n_samples))
    times = dt * stride * np.arange(n_steps // stride + 1)
    exact = _propagator_for(to_matrix(H_poly, basis))
    trotter = TrotterPropagator(polys, basis)
    xs = [position_matrix(basis, p) for p in range(basis.n_modes)]
    left = left_well_projector(basis, 0)
    seg = None
    if trotter.props[0].evals is not None:
        seg = np.linalg.matrix_power(trotter.step_matrix(dt), stride)
    rows = {k: [] for k in ("xe", "xt", "le", "lt", "err")}
    psi_t = np.asarray(psi0, dtype=complex)
    for k, t in enumerate(times):
        if k:
            if seg is not None:
                psi_t = seg @ psi_t
            else:
                for _ in range(stride):
                    psi_t = trotter.step(psi_t, dt)
        psi_e = exact.apply(np.asarray(psi0, dtype=complex), t)
        rows["xe"].append([expectation(x, psi_e) for x in xs])
        rows["xt"].append([expectation(x, psi_t) for x in xs])
        rows["le"].append(expectation(left, psi_e))
        rows["lt"].append(expectation(left, psi_t))
        rows["err"].append(overlap_error(psi_e, psi_t))
    return Trajectory(times, np.array(rows["xe"]), np.array(rows["xt"]), np.array(rows["le"]),
                      np.array(rows["lt"]), np.array(rows["err"]))


@dataclass
class SweepPoint:
    dt: float
    n_steps: int
    partial_step: float
    overlap_error: float  # against exact propagation under H
    trotter_error: float  # against exact propagation under the fragment sum


def trotter_sweep(H_poly: BosonPolynomial, polys: Sequence[BosonPolynomial], basis: FockBasis,
                  psi0: np.ndarray, t_total: float, dts: Sequence[float]) -> List[SweepPoint]:
    """Overlap errors at ``t_total`` for each Trotter step in ``dts``.

    The fragment sum differs from H by the discarded residual, which sets a
    dt-independent floor on ``overlap_error``; ``trotter_error`` isolates the
    splitting error itself.
    """
    psi0 = np.asarray(psi0, dtype=complex)
    psi_ex = evolve_exact(to_matrix(H_poly, basis), psi0, t_total)
    total = polys[0]
    for p in polys[1:]:
        total = total + p
    psi_sum = Propagator(to_matrix(total, basis)).apply(psi0, t_total)
    trotter = TrotterPropagator(polys, basis)
    out = []
    for dt in dts:
        res = trotter.evolve(psi0, t_total, float(dt))
        out.append(SweepPoint(float(dt), res.n_steps, res.partial_step,
                              overlap_error(psi_ex, res.state), overlap_error(psi_sum, res.state)))
    return out


def loglog_slope(x: Sequence[float], y: Sequence[float]) -> float:
    """Least-squares slope of log y against log x."""
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])
