"""Compile fragment propagators into elementary bosonic gates and check them.

Gate conventions (real parameters)::

    D(gamma)      = exp(gamma (b^dag - b))
    BS(theta,phi) = exp(-i theta/2 (e^{i phi} b_p^dag b_q + e^{-i phi} b_q^dag b_p))
    S(zeta)       = exp(zeta/2 (b^dag^2 - b^2))
    R(theta)      = exp(-i theta n)
    Kerr(kappa)   = exp(-i kappa n^2)
    CrossKerr(k)  = exp(-i k n_p n_q)

A circuit lists gates in application order: the first gate acts first on a
state.  Its operator is therefore the reversed product of the gate list.
Times are in a.u. and energies in cm^-1, so phases are ``E t / HARTREE_TO_CM``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Union

import numpy as np

from .bogoliubov import (BlochMessiah, BogoliubovTransform, QuadraticNormalForm,
                         UnstableQuadratic, bloch_messiah)
from .boson_algebra import HARTREE_TO_CM
from .fock_sim import FockBasis, annihilation

KINDS = {
    "D": ("gamma",),
    "BS": ("theta", "phi"),
    "S": ("zeta",),
    "R": ("theta",),
    "Kerr": ("kappa",),
    "CrossKerr": ("kappa",),
}
TWO_MODE = {"BS", "CrossKerr"}
DIAGONAL = {"R", "Kerr", "CrossKerr"}
PARAM_TOL = 1e-14


class CompileError(ValueError):
    pass


@dataclass(frozen=True)
class Gate:
    kind: str
    modes: tuple
    params: Dict[str, float]

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown gate kind {self.kind!r}")
        modes = tuple(int(m) for m in self.modes)
        object.__setattr__(self, "modes", modes)
        want = 2 if self.kind in TWO_MODE else 1
        if len(modes) != want:
            raise ValueError(f"{self.kind} acts on {want} mode(s)")
        if want == 2 and modes[0] == modes[1]:
            raise ValueError(f"{self.kind} needs two distinct modes")
        if any(m < 0 for m in modes):
            raise ValueError("negative mode index")
        if set(self.params) != set(KINDS[self.kind]):
            raise ValueError(f"{self.kind} takes parameters {KINDS[self.kind]}")
        params = {k: float(v) for k, v in self.params.items()}
        if not all(math.isfinite(v) for v in params.values()):
            raise ValueError("non-finite gate parameter")
        object.__setattr__(self, "params", params)

    def inverse(self) -> "Gate":
        params = dict(self.params)
        key = "gamma" if self.kind == "D" else "zeta" if self.kind == "S" else \
            "theta" if self.kind in ("BS", "R") else "kappa"
        params[key] = -params[key]
        return Gate(self.kind, self.modes, params)

    def to_json(self) -> dict:
        return {"kind": self.kind, "modes": list(self.modes), **self.params}

    @classmethod
    def from_json(cls, d: dict) -> "Gate":
        kind = d["kind"]
        if kind not in KINDS:
            raise ValueError(f"unknown gate kind {kind!r}")
        return cls(kind, tuple(d["modes"]), {k: d[k] for k in KINDS[kind]})


@dataclass
class GateCircuit:
    n_modes: int
    gates: List[Gate] = field(default_factory=list)
    global_phase: float = 0.0  # radians; operator carries exp(i * global_phase)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        for g in self.gates:
            if max(g.modes) >= self.n_modes:
                raise ValueError(f"gate {g.kind} on mode {max(g.modes)} outside {self.n_modes} modes")

    def __len__(self):
        return len(self.gates)

    def append(self, g: Gate):
        if max(g.modes) >= self.n_modes:
            raise ValueError("gate mode out of range")
        self.gates.append(g)

    def then(self, other: "GateCircuit") -> "GateCircuit":
        """This circuit followed by ``other``."""
        if other.n_modes != self.n_modes:
            raise ValueError("mode count mismatch")
        return GateCircuit(self.n_modes, self.gates + other.gates,
                           self.global_phase + other.global_phase, dict(self.meta))

    def inverse(self) -> "GateCircuit":
        return GateCircuit(self.n_modes, [g.inverse() for g in reversed(self.gates)],
                           -self.global_phase, dict(self.meta))

    def counts(self) -> Dict[str, int]:
        out: Dict[str, int] = {}
        for g in self.gates:
            out[g.kind] = out.get(g.kind, 0) + 1
        return out

    def to_json(self) -> dict:
        return {"n_modes": self.n_modes, "gates": [g.to_json() for g in self.gates],
                "global_phase": self.global_phase, "meta": self.meta}

    @classmethod
    def from_json(cls, d: dict) -> "GateCircuit":
        return cls(int(d["n_modes"]), [Gate.from_json(g) for g in d["gates"]],
                   float(d.get("global_phase", 0.0)), dict(d.get("meta", {})))


# -- passive layers -------------------------------------------------------


def bs_mode_matrix(n: int, p: int, q: int, theta: float) -> np.ndarray:
    """Heisenberg action ``G^dag b G = R b`` of BS_pq(theta, pi/2)."""
    R = np.eye(n)
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    R[p, p] = R[q, q] = c
    R[p, q] = s
    R[q, p] = -s
    return R


def givens_layer(O: np.ndarray, method: str = "givens") -> List[Gate]:
    """Beamsplitters (plus a pi rotation when det O = -1) realizing the passive map ``O``.

    The returned gates are in application order and their Heisenberg mode
    matrices multiply back to ``O``.  ``method="log"`` reads the single angle
    from the matrix logarithm; it is exact only for two modes.
    """
    O = np.asarray(O, dtype=float)
    n = O.shape[0]
    if np.abs(O @ O.T - np.eye(n)).max() > 1e-9:
        raise CompileError("passive layer is not orthogonal")
    det = np.linalg.det(O)
    if method == "log":
        if n > 2:
            raise CompileError("log-angle beamsplitter layer is exact only for two modes")
        gates = [] if det > 0 else [Gate("R", (n - 1,), {"theta": math.pi})]
        if det < 0:
            O = O @ np.diag([1.0] * (n - 1) + [-1.0])
        if n == 2:
            chi = math.atan2(O[0, 1], O[0, 0])
            if abs(chi) > PARAM_TOL:
                gates.append(Gate("BS", (0, 1), {"theta": 2 * chi, "phi": math.pi / 2}))
        return gates
    if method != "givens":
        raise ValueError(f"unknown method {method!r}")

    work = O.copy()
    factors = []  # rotations G with G_k ... G_1 O = diag(1, ..., 1, det)
    for j in range(n - 1):
        for i in range(n - 1, j, -1):
            a, b = i - 1, i
            r = math.hypot(work[a, j], work[b, j])
            if work[b, j] == 0.0 and work[a, j] >= 0.0:
                continue
            c, s = work[a, j] / r, work[b, j] / r
            G = np.eye(n)
            G[a, a] = G[b, b] = c
            G[a, b] = s
            G[b, a] = -s
            work = G @ work
            factors.append((a, b, math.atan2(-s, c)))
    # O = G_1^T ... G_k^T D; operator order reverses into application order
    gates = []
    if det < 0:
        gates.append(Gate("R", (n - 1,), {"theta": math.pi}))
    for a, b, chi in reversed(factors):
        if abs(chi) > PARAM_TOL:
            gates.append(Gate("BS", (a, b), {"theta": 2 * chi, "phi": math.pi / 2}))
    return gates


def layer_mode_matrix(gates: Sequence[Gate], n: int) -> np.ndarray:
    """Heisenberg mode matrix of a passive gate list (application order)."""
    M = np.eye(n)
    for g in gates:
        if g.kind == "BS":
            if abs(g.params["phi"] - math.pi / 2) > 1e-12:
                raise ValueError("only phi = pi/2 beamsplitters are real")
            G = bs_mode_matrix(n, *g.modes, g.params["theta"])
        elif g.kind == "R":
            if abs(abs(g.params["theta"]) - math.pi) > 1e-12 and abs(g.params["theta"]) > 1e-12:
                raise ValueError("only 0 / pi rotations are real")
            G = np.eye(n)
            G[g.modes[0], g.modes[0]] = math.cos(g.params["theta"])
        else:
            raise ValueError(f"{g.kind} is not passive")
        M = G @ M
    return M


# -- compilation ----------------------------------------------------------


def compile_bogoliubov(t: BogoliubovTransform, method: str = "givens") -> GateCircuit:
    """Circuit for ``U_b = D(gamma) G_W S(zeta) G_X^T`` in application order."""
    n = t.n_modes
    if t.is_identity():
        return GateCircuit(n, meta={"source": "bogoliubov"})
    bm = bloch_messiah(t)
    W, X = bm.W.copy(), bm.X.copy()
    if np.linalg.det(W) < 0 and np.linalg.det(X) < 0:
        # diag(s) commutes with cosh/sinh(zeta): flip the same column of both
        W[:, -1] *= -1
        X[:, -1] *= -1
    gates = givens_layer(X.T, method)
    for p, z in enumerate(bm.zeta):
        if abs(z) > PARAM_TOL:
            gates.append(Gate("S", (p,), {"zeta": float(z)}))
    gates += givens_layer(W, method)
    for p, g in enumerate(t.gamma):
        if abs(g) > PARAM_TOL:
            gates.append(Gate("D", (p,), {"gamma": float(g)}))
    return GateCircuit(n, gates, 0.0, {"source": "bogoliubov", "zeta": bm.zeta.tolist()})


def compile_diagonal_quadratic(eps: Sequence[float], K: float, t: float) -> GateCircuit:
    """``exp(-i (sum eps_p n_p + K) t)`` as rotations plus a global phase."""
    eps = np.asarray(eps, dtype=float)
    scale = t / HARTREE_TO_CM
    gates = [Gate("R", (p,), {"theta": float(e * scale)})
             for p, e in enumerate(eps) if abs(e * scale) > PARAM_TOL]
    return GateCircuit(len(eps), gates, float(-K * scale), {"source": "diagonal_quadratic", "t": t})


def compile_diagonal_quartic(eta: np.ndarray, t: float) -> GateCircuit:
    """``exp(-i sum_pq eta_pq n_p n_q t)`` as Kerr and cross-Kerr gates (all commuting)."""
    eta = np.asarray(eta, dtype=float)
    if eta.ndim != 2 or eta.shape[0] != eta.shape[1]:
        raise ValueError("eta must be square")
    if np.abs(eta - eta.T).max(initial=0.0) > 1e-12 * max(1.0, np.abs(eta).max(initial=0.0)):
        raise ValueError("eta must be symmetric")
    n = eta.shape[0]
    scale = t / HARTREE_TO_CM
    gates = []
    for p in range(n):
        if abs(eta[p, p] * scale) > PARAM_TOL:
            gates.append(Gate("Kerr", (p,), {"kappa": float(eta[p, p] * scale)}))
    for p in range(n):
        for q in range(p):
            k = (eta[p, q] + eta[q, p]) * scale
            if abs(k) > PARAM_TOL:
                gates.append(Gate("CrossKerr", (p, q), {"kappa": float(k)}))
    assert all(g.kind in DIAGONAL for g in gates)
    return GateCircuit(n, gates, 0.0, {"source": "diagonal_quartic", "t": t})


def compile_fragment_step(frag, t: float, method: str = "givens") -> GateCircuit:
    """``U_b^dag exp(-i D t) U_b`` for a quartic fragment or a stable quadratic normal form."""
    if isinstance(frag, UnstableQuadratic):
        raise CompileError(f"quadratic fragment has no stable normal form: {frag.reason}")
    if isinstance(frag, QuadraticNormalForm):
        transform = frag.transform
        diag = compile_diagonal_quadratic(frag.eps, frag.K, t)
    elif hasattr(frag, "eta"):
        transform = frag.transform
        diag = compile_diagonal_quartic(frag.eta, t)
    else:
        raise TypeError(f"cannot compile {type(frag).__name__}")
    ub = compile_bogoliubov(transform, method)
    out = ub.then(diag).then(ub.inverse())
    out.meta = {"source": "fragment_step", "t": t,
                "kind": "quadratic" if isinstance(frag, QuadraticNormalForm) else "quartic"}
    return out


def compile_fragment_set(fs, t: float, method: str = "givens") -> List[GateCircuit]:
    """One Trotter step's circuits, quadratic fragment first."""
    circuits = []
    for k, frag in enumerate([fs.quadratic] + list(fs.fragments)):
        c = compile_fragment_step(frag, t, method)
        c.meta["fragment"] = k
        circuits.append(c)
    return circuits


# -- verification ---------------------------------------------------------


def _hermitian_exp(h: np.ndarray) -> np.ndarray:
    """``exp(-i h)`` for Hermitian ``h`` via eigendecomposition."""
    w, v = np.linalg.eigh(h)
    return (v * np.exp(-1j * w)) @ v.conj().T


def gate_matrix(g: Gate, cutoffs: Sequence[int]) -> np.ndarray:
    """Local truncated matrix of ``g`` on its own modes (mode order as in ``g.modes``)."""
    dims = [cutoffs[m] + 1 for m in g.modes]
    if g.kind in DIAGONAL:
        ns = [np.arange(d, dtype=float) for d in dims]
        if g.kind == "R":
            phase = g.params["theta"] * ns[0]
        elif g.kind == "Kerr":
            phase = g.params["kappa"] * ns[0] ** 2
        else:
            phase = g.params["kappa"] * np.outer(ns[0], ns[1]).ravel()
        return np.diag(np.exp(-1j * phase))
    if g.kind == "D":
        b = annihilation(cutoffs[g.modes[0]])
        h = 1j * g.params["gamma"] * (b.T - b)
    elif g.kind == "S":
        b = annihilation(cutoffs[g.modes[0]])
        h = 0.5j * g.params["zeta"] * (b.T @ b.T - b @ b)
    else:
        bp = np.kron(annihilation(cutoffs[g.modes[0]]), np.eye(dims[1]))
        bq = np.kron(np.eye(dims[0]), annihilation(cutoffs[g.modes[1]]))
        e = np.exp(1j * g.params["phi"])
        h = 0.5 * g.params["theta"] * (e * bp.T @ bq + np.conj(e) * bq.T @ bp)
        # the generator conserves n_p + n_q: exponentiate each sector separately
        total = np.add.outer(np.arange(dims[0]), np.arange(dims[1])).ravel()
        out = np.zeros(h.shape, dtype=complex)
        for s in np.unique(total):
            idx = np.flatnonzero(total == s)
            out[np.ix_(idx, idx)] = _hermitian_exp(h[np.ix_(idx, idx)])
        return out
    return _hermitian_exp(h)


def apply_gate(g: Gate, basis: FockBasis, psi: np.ndarray) -> np.ndarray:
    """Apply ``g`` to state vector(s) ``psi`` (columns index extra states)."""
    extra = psi.shape[1:]
    tensor = psi.reshape(basis.shape + extra)
    G = gate_matrix(g, basis.cutoffs)
    k = len(g.modes)
    G = G.reshape([basis.shape[m] for m in g.modes] * 2)
    out = np.tensordot(G, tensor, axes=(list(range(k, 2 * k)), list(g.modes)))
    # tensordot puts the gate's output axes first; move them back in place
    out = np.moveaxis(out, list(range(k)), list(g.modes))
    return out.reshape(psi.shape)


def circuit_apply(c: GateCircuit, basis: FockBasis, psi: np.ndarray) -> np.ndarray:
    """Apply the circuit (global phase included) to state vector(s) ``psi``."""
    if c.n_modes != basis.n_modes:
        raise ValueError("circuit and basis have different mode counts")
    out = np.asarray(psi, dtype=complex)
    for g in c.gates:
        out = apply_gate(g, basis, out)
    return np.exp(1j * c.global_phase) * out


def circuit_to_matrix(c: GateCircuit, basis: FockBasis) -> np.ndarray:
    if basis.dim > 4096:
        raise ValueError(f"dense circuit matrix of dimension {basis.dim} refused")
    return circuit_apply(c, basis, np.eye(basis.dim, dtype=complex))


def verification_limit(c: GateCircuit, basis: FockBasis, eps: float = 1e-9) -> int:
    """Largest total occupation whose states can be checked at this cutoff.

    Beamsplitters may gather all photons in one mode, so the block bounds the
    total occupation.  Squeezing stretches occupations by up to e^(2 zeta) and
    leaves a geometric tail ~ tanh(zeta)^(m/2); displacement shifts by about
    2 gamma (gamma + sqrt(n)).  The buffer ``max(4, 2 zeta sqrt(n_max))`` is
    kept as a floor.
    """
    zeta = max([abs(g.params["zeta"]) for g in c.gates if g.kind == "S"], default=0.0)
    gamma = max([abs(g.params["gamma"]) for g in c.gates if g.kind == "D"], default=0.0)
    n_max = min(basis.cutoffs)
    margin = max(4.0, 2.0 * zeta * math.sqrt(n_max))
    if zeta > 0:
        margin = max(margin, 2.0 * math.log(eps) / math.log(math.tanh(zeta)))
    margin += 2.0 * gamma * (gamma + math.sqrt(n_max))
    return int(math.floor((n_max - margin) / math.exp(2.0 * zeta)))


def block_distance(A: np.ndarray, B: np.ndarray, basis: FockBasis, limit: int) -> float:
    """Frobenius distance between the actions of ``A`` and ``B`` on states with total occupation <= limit."""
    idx = basis.total_block(limit)
    if limit < 0 or idx.size == 0:
        raise ValueError("no states to compare")
    return float(np.linalg.norm(A[:, idx] - B[:, idx]))


def verify_fragment_step(frag, t: float, basis: FockBasis, limit: Optional[int] = None):
    """Compile ``frag`` and compare with ``exp(-i H_k t)`` on the low-occupation block.

    Returns ``(distance, n_block_states, circuit)``.
    """
    from .fock_sim import Propagator, to_matrix

    c = compile_fragment_step(frag, t)
    if limit is None:
        limit = verification_limit(c, basis)
    if limit < 0:
        raise ValueError(f"cutoff {basis.cutoffs} too small to verify this circuit")
    idx = basis.total_block(limit)
    cols = np.zeros((basis.dim, idx.size), dtype=complex)
    cols[idx, np.arange(idx.size)] = 1.0
    poly = frag.polynomial() if isinstance(frag, QuadraticNormalForm) else frag.poly
    exact = Propagator(to_matrix(poly, basis, sparse=False)).apply(cols, t)
    return float(np.linalg.norm(circuit_apply(c, basis, cols) - exact)), int(idx.size), c
