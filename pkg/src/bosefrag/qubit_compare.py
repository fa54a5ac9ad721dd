"""Direct (one-hot) boson-to-qubit mapping and fully-commuting Pauli grouping.

Each mode with cutoff ``n_max`` uses ``n_max + 1`` qubits, ordered mode-major
then level-minor; level ``n`` of mode ``p`` is qubit ``p (n_max + 1) + n`` in
state |1>.  A truncated single-mode operator ``O`` is embedded as
``sum_ij O_ij s+_i s-_j`` with ``s+_i s-_i = (I - Z_i)/2``; identity factors
embed as the qubit identity.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Sequence

import numpy as np

from .boson_algebra import BosonPolynomial
from .fock_sim import _mode_operator

MAX_QUBITS = 40
DROP_TOL = 1e-10


@dataclass(frozen=True)
class PauliString:
    letters: str
    coeff: float

    def __post_init__(self):
        if set(self.letters) - set("IXYZ"):
            raise ValueError(f"bad Pauli letters {self.letters!r}")

    @property
    def n_qubits(self) -> int:
        return len(self.letters)

    def symplectic(self):
        x = z = 0
        for k, ch in enumerate(self.letters):
            if ch in "XY":
                x |= 1 << k
            if ch in "ZY":
                z |= 1 << k
        return x, z

    def commutes(self, other: "PauliString") -> bool:
        x1, z1 = self.symplectic()
        x2, z2 = other.symplectic()
        return bin((x1 & z2) ^ (z1 & x2)).count("1") % 2 == 0

    def to_matrix(self) -> np.ndarray:
        return self.coeff * pauli_matrix(self.letters)


_SINGLE = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]]),
    "Z": np.diag([1.0, -1.0]).astype(complex),
}


def pauli_matrix(letters: str) -> np.ndarray:
    """Dense matrix with qubit 0 as the most significant tensor factor."""
    out = np.ones((1, 1), dtype=complex)
    for ch in letters:
        out = np.kron(out, _SINGLE[ch])
    return out


def _transfer(i: int, j: int, width: int) -> Dict[str, complex]:
    """Pauli expansion of s+_i s-_j on ``width`` qubits."""
    def put(pairs):
        s = ["I"] * width
        for k, ch in pairs:
            s[k] = ch
        return "".join(s)

    if i == j:
        return {put([]): 0.5, put([(i, "Z")]): -0.5}
    # s+ = (X - iY)/2, s- = (X + iY)/2
    return {
        put([(i, "X"), (j, "X")]): 0.25,
        put([(i, "X"), (j, "Y")]): 0.25j,
        put([(i, "Y"), (j, "X")]): -0.25j,
        put([(i, "Y"), (j, "Y")]): 0.25,
    }


def _embed_mode(op: np.ndarray) -> Dict[str, complex]:
    width = op.shape[0]
    out: Dict[str, complex] = {}
    for i, j in zip(*np.nonzero(op)):
        for s, c in _transfer(int(i), int(j), width).items():
            out[s] = out.get(s, 0.0) + op[i, j] * c
    return out


def boson_to_qubit_direct(p: BosonPolynomial, n_max: int) -> List[PauliString]:
    """Real Pauli expansion of the one-hot embedding of ``p`` truncated at ``n_max``."""
    if p.degree > 4:
        raise ValueError("polynomials of degree > 4 are not supported")
    width = n_max + 1
    n_qubits = p.n_modes * width
    if n_qubits > MAX_QUBITS:
        raise ValueError(f"{n_qubits} qubits exceed the limit of {MAX_QUBITS}")
    identity = "I" * width
    total: Dict[str, complex] = {}
    for mono, coeff in p.terms.items():
        acc: Dict[str, complex] = {"": complex(coeff)}
        for c, a in mono:
            if c == 0 and a == 0:
                local = {identity: 1.0}
            else:
                local = _embed_mode(_mode_operator(n_max, c, a))
            acc = {s + t: u * v for s, u in acc.items() for t, v in local.items()}
        for s, v in acc.items():
            total[s] = total.get(s, 0.0) + v
    strings = []
    for s, v in total.items():
        if abs(v.imag) > 1e-8 * max(1.0, abs(v)):
            raise ValueError("polynomial is not Hermitian: complex Pauli coefficient")
        if abs(v.real) >= DROP_TOL:
            strings.append(PauliString(s, float(v.real)))
    strings.sort(key=lambda ps: ps.letters)
    return strings


def one_hot_embedding(p: BosonPolynomial, n_max: int) -> np.ndarray:
    """Dense 2^Q matrix of the embedding (test oracle; small Q only)."""
    width = n_max + 1
    if p.n_modes * width > 14:
        raise ValueError("dense embedding limited to 14 qubits")

    def mode_embed(op):
        out = np.zeros((2 ** width, 2 ** width), dtype=complex)
        sp = np.array([[0, 0], [1, 0]], dtype=complex)  # |1><0|
        for i, j in zip(*np.nonzero(op)):
            factors = [np.eye(2, dtype=complex)] * width
            if i == j:
                factors[i] = sp @ sp.T
            else:
                factors[i] = sp
                factors[j] = sp.T
            term = np.ones((1, 1), dtype=complex)
            for f in factors:
                term = np.kron(term, f)
            out += op[i, j] * term
        return out

    dim = 2 ** (width * p.n_modes)
    total = np.zeros((dim, dim), dtype=complex)
    for mono, coeff in p.terms.items():
        term = np.ones((1, 1), dtype=complex)
        for c, a in mono:
            if c == 0 and a == 0:
                term = np.kron(term, np.eye(2 ** width))
            else:
                term = np.kron(term, mode_embed(_mode_operator(n_max, c, a)))
        total += coeff * term
    return total


@dataclass
class FcGrouping:
    groups: List[List[PauliString]]

    def __len__(self):
        return len(self.groups)

    def certificate(self) -> bool:
        """Every pair inside every group commutes (exact symplectic parity)."""
        for g in self.groups:
            sym = [ps.symplectic() for ps in g]
            for a in range(len(sym)):
                x1, z1 = sym[a]
                for b in range(a + 1, len(sym)):
                    x2, z2 = sym[b]
                    if bin((x1 & z2) ^ (z1 & x2)).count("1") % 2:
                        return False
        return True


def sorted_insertion(strings: Sequence[PauliString]) -> FcGrouping:
    """Greedy fully-commuting grouping, largest |coefficient| first.

    Ties are broken by the lexicographic order of the letters.
    """
    if not strings:
        raise ValueError("nothing to group")
    order = sorted(strings, key=lambda ps: (-abs(ps.coeff), ps.letters))
    groups: List[List[PauliString]] = []
    group_sym: List[List[tuple]] = []
    for ps in order:
        x1, z1 = ps.symplectic()
        for g, sym in zip(groups, group_sym):
            if all(bin((x1 & z2) ^ (z1 & x2)).count("1") % 2 == 0 for x2, z2 in sym):
                g.append(ps)
                sym.append((x1, z1))
                break
        else:
            groups.append([ps])
            group_sym.append([(x1, z1)])
    return FcGrouping(groups)


def compare(hamiltonian: BosonPolynomial, n_bosonic_fragments: int, n_max: int) -> dict:
    """Comparison report between bosonic fragments and qubit FC groups."""
    strings = boson_to_qubit_direct(hamiltonian, n_max)
    grouping = sorted_insertion(strings)
    if not grouping.certificate():
        raise RuntimeError("FC grouping certificate failed")
    return {
        "bosonic_fragments": int(n_bosonic_fragments),
        "pauli_strings": len(strings),
        "fc_groups": len(grouping),
        "ratio": len(grouping) / n_bosonic_fragments,
        "n_max": int(n_max),
        "qubits": hamiltonian.n_modes * (n_max + 1),
    }
