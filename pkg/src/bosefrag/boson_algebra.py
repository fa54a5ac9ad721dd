"""Normal-ordered polynomials in bosonic ladder operators.

A monomial is stored as a tuple of per-mode ``(creation, annihilation)``
exponent pairs and always stands for the normal-ordered product

    b_0^dag^c0 b_1^dag^c1 ... b_0^a0 b_1^a1 ...

Coefficients are real floats.  Every ring operation returns a freshly pruned
polynomial; instances are treated as immutable.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Dict, Iterable, Iterator, Mapping, Sequence, Tuple

import numpy as np

PRUNE_TOL = 1e-14

#: 1 hartree in wavenumbers (CODATA 2018)
HARTREE_TO_CM = 219474.6313632

Monomial = Tuple[Tuple[int, int], ...]
LadderToken = Tuple[int, bool]  # (mode, is_creation)


def identity_monomial(n_modes: int) -> Monomial:
    return ((0, 0),) * n_modes


def monomial_degree(m: Monomial) -> int:
    return sum(c + a for c, a in m)


def monomial_sort_key(m: Monomial):
    """Graded lexicographic key: total degree, creation exponents, annihilation exponents."""
    return (monomial_degree(m), tuple(c for c, _ in m), tuple(a for _, a in m))


def adjoint_monomial(m: Monomial) -> Monomial:
    return tuple((a, c) for c, a in m)


@lru_cache(maxsize=None)
def _reorder_single_mode(a: int, c: int) -> Tuple[Tuple[int, int, int], ...]:
    """Normal order ``b^a b^dag^c`` for one mode.

    Returns ``(weight, creation_power, annihilation_power)`` triples using
    b^a b^dag^c = sum_k k! C(a,k) C(c,k) b^dag^(c-k) b^(a-k).
    """
    out = []
    for k in range(min(a, c) + 1):
        w = math.factorial(k) * math.comb(a, k) * math.comb(c, k)
        out.append((w, c - k, a - k))
    return tuple(out)


def _multiply_monomials(m1: Monomial, m2: Monomial) -> Iterator[Tuple[Monomial, int]]:
    per_mode = []
    for (c1, a1), (c2, a2) in zip(m1, m2):
        per_mode.append(
            [(w, (c1 + c, a + a2)) for w, c, a in _reorder_single_mode(a1, c2)]
        )
    for combo in itertools.product(*per_mode):
        weight = 1
        mono = []
        for w, pair in combo:
            weight *= w
            mono.append(pair)
        yield tuple(mono), weight


def _check_real(value) -> float:
    if isinstance(value, complex) or np.iscomplexobj(value):
        raise TypeError("BosonPolynomial coefficients must be real")
    return float(value)


@dataclass(frozen=True, eq=False)
class BosonPolynomial:
    """Real-coefficient polynomial in normal-ordered ladder monomials."""

    n_modes: int
    terms: Mapping[Monomial, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.n_modes < 1:
            raise ValueError("n_modes must be positive")
        clean: Dict[Monomial, float] = {}
        for mono, coeff in self.terms.items():
            mono = tuple((int(c), int(a)) for c, a in mono)
            if len(mono) != self.n_modes:
                raise ValueError(f"monomial {mono} does not have {self.n_modes} modes")
            if any(c < 0 or a < 0 for c, a in mono):
                raise ValueError(f"negative exponent in {mono}")
            coeff = _check_real(coeff)
            if not math.isfinite(coeff):
                raise ValueError("non-finite coefficient")
            if abs(coeff) > PRUNE_TOL:
                clean[mono] = clean.get(mono, 0.0) + coeff
        clean = {m: c for m, c in clean.items() if abs(c) > PRUNE_TOL}
        object.__setattr__(self, "terms", clean)

    # -- constructors -----------------------------------------------------

    @classmethod
    def zero(cls, n_modes: int) -> "BosonPolynomial":
        return cls(n_modes, {})

    @classmethod
    def constant(cls, n_modes: int, value: float = 1.0) -> "BosonPolynomial":
        return cls(n_modes, {identity_monomial(n_modes): value})

    @classmethod
    def ladder(cls, n_modes: int, mode: int, creation: bool) -> "BosonPolynomial":
        _check_mode(mode, n_modes)
        mono = [(0, 0)] * n_modes
        mono[mode] = (1, 0) if creation else (0, 1)
        return cls(n_modes, {tuple(mono): 1.0})

    @classmethod
    def number(cls, n_modes: int, mode: int) -> "BosonPolynomial":
        _check_mode(mode, n_modes)
        mono = [(0, 0)] * n_modes
        mono[mode] = (1, 1)
        return cls(n_modes, {tuple(mono): 1.0})

    @classmethod
    def position(cls, n_modes: int, mode: int) -> "BosonPolynomial":
        """Dimensionless coordinate q = (b + b^dag)/sqrt(2)."""
        s = 1.0 / math.sqrt(2.0)
        return (cls.ladder(n_modes, mode, True) + cls.ladder(n_modes, mode, False)) * s

    @classmethod
    def momentum_squared(cls, n_modes: int, mode: int) -> "BosonPolynomial":
        """p^2 = -(b - b^dag)^2 / 2, real in the ladder basis even though p is not."""
        d = cls.ladder(n_modes, mode, False) - cls.ladder(n_modes, mode, True)
        return (d * d) * -0.5

    # -- queries ----------------------------------------------------------

    def __iter__(self):
        return iter(self.sorted_items())

    def __len__(self):
        return len(self.terms)

    def sorted_items(self):
        return sorted(self.terms.items(), key=lambda kv: monomial_sort_key(kv[0]))

    def coeff(self, mono: Monomial) -> float:
        return self.terms.get(tuple(tuple(p) for p in mono), 0.0)

    @property
    def degree(self) -> int:
        return max((monomial_degree(m) for m in self.terms), default=0)

    @property
    def constant_term(self) -> float:
        return self.terms.get(identity_monomial(self.n_modes), 0.0)

    def is_zero(self) -> bool:
        return not self.terms

    def is_hermitian(self) -> bool:
        return all(
            self.terms.get(adjoint_monomial(m)) == c for m, c in self.terms.items()
        )

    def hermiticity_defect(self) -> float:
        return max(
            (abs(c - self.terms.get(adjoint_monomial(m), 0.0)) for m, c in self.terms.items()),
            default=0.0,
        )

    def hermitian_part(self) -> "BosonPolynomial":
        """(p + p^dag)/2; removes last-bit mismatches left by accumulation order."""
        out = {}
        for m, c in self.terms.items():
            out[m] = 0.5 * (c + self.terms.get(adjoint_monomial(m), 0.0))
        return BosonPolynomial(self.n_modes, out)

    def adjoint(self) -> "BosonPolynomial":
        return BosonPolynomial(self.n_modes, {adjoint_monomial(m): c for m, c in self.terms.items()})

    def select_degrees(self, degrees: Iterable[int]) -> "BosonPolynomial":
        keep = set(degrees)
        return BosonPolynomial(
            self.n_modes, {m: c for m, c in self.terms.items() if monomial_degree(m) in keep}
        )

    def norm(self) -> float:
        return math.sqrt(sum(c * c for c in self.terms.values()))

    def distance(self, other: "BosonPolynomial") -> float:
        return (self - other).norm()

    # -- arithmetic -------------------------------------------------------

    def _same_modes(self, other: "BosonPolynomial"):
        if self.n_modes != other.n_modes:
            raise ValueError(f"mode-count mismatch: {self.n_modes} vs {other.n_modes}")

    def __add__(self, other):
        if isinstance(other, (int, float)):
            other = BosonPolynomial.constant(self.n_modes, other)
        if not isinstance(other, BosonPolynomial):
            return NotImplemented
        self._same_modes(other)
        out = dict(self.terms)
        for m, c in other.terms.items():
            out[m] = out.get(m, 0.0) + c
        return BosonPolynomial(self.n_modes, out)

    __radd__ = __add__

    def __neg__(self):
        return BosonPolynomial(self.n_modes, {m: -c for m, c in self.terms.items()})

    def __sub__(self, other):
        if isinstance(other, (int, float)):
            other = BosonPolynomial.constant(self.n_modes, other)
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (int, float, np.floating, np.integer)):
            s = _check_real(other)
            return BosonPolynomial(self.n_modes, {m: c * s for m, c in self.terms.items()})
        if isinstance(other, (complex, np.complexfloating)):
            raise TypeError("BosonPolynomial coefficients must be real")
        if not isinstance(other, BosonPolynomial):
            return NotImplemented
        self._same_modes(other)
        out: Dict[Monomial, float] = {}
        for m1, c1 in self.terms.items():
            for m2, c2 in other.terms.items():
                for mono, w in _multiply_monomials(m1, m2):
                    out[mono] = out.get(mono, 0.0) + c1 * c2 * w
        return BosonPolynomial(self.n_modes, out)

    def __rmul__(self, other):
        if isinstance(other, (int, float, np.floating, np.integer)):
            return self * other
        return NotImplemented

    def __pow__(self, k: int):
        if k < 0:
            raise ValueError("negative power")
        out = BosonPolynomial.constant(self.n_modes, 1.0)
        for _ in range(k):
            out = out * self
        return out

    def __eq__(self, other):
        if not isinstance(other, BosonPolynomial):
            return NotImplemented
        return self.n_modes == other.n_modes and self.terms == other.terms

    __hash__ = None

    def allclose(self, other: "BosonPolynomial", atol: float = 1e-10) -> bool:
        self._same_modes(other)
        return (self - other).norm() <= atol

    # -- serialization ----------------------------------------------------

    def to_json(self) -> dict:
        return {
            "n_modes": self.n_modes,
            "terms": [
                {"creation": [c for c, _ in m], "annihilation": [a for _, a in m], "coeff": v}
                for m, v in self.sorted_items()
            ],
        }

    @classmethod
    def from_json(cls, data: dict) -> "BosonPolynomial":
        terms = {}
        for t in data["terms"]:
            mono = tuple(zip(t["creation"], t["annihilation"]))
            terms[mono] = terms.get(mono, 0.0) + t["coeff"]
        return cls(int(data["n_modes"]), terms)

    def __repr__(self):
        if not self.terms:
            return f"BosonPolynomial({self.n_modes}, 0)"
        parts = []
        for m, c in self.sorted_items():
            ops = []
            for k, (cr, _) in enumerate(m):
                if cr:
                    ops.append(f"b{k}^+" + (f"^{cr}" if cr > 1 else ""))
            for k, (_, an) in enumerate(m):
                if an:
                    ops.append(f"b{k}" + (f"^{an}" if an > 1 else ""))
            parts.append(f"{c:+.6g}" + ("*" + " ".join(ops) if ops else ""))
        return f"BosonPolynomial({self.n_modes}, " + " ".join(parts) + ")"


def _check_mode(mode: int, n_modes: int):
    if not 0 <= mode < n_modes:
        raise ValueError(f"mode index {mode} out of range for {n_modes} modes")


def poly_add(p: BosonPolynomial, q: BosonPolynomial) -> BosonPolynomial:
    return p + q


def poly_mul(p: BosonPolynomial, q: BosonPolynomial) -> BosonPolynomial:
    return p * q


def normal_order(word: Sequence[LadderToken], n_modes: int) -> BosonPolynomial:
    """Normal-order a product of ladder operators.

    ``word`` is a sequence of ``(mode, is_creation)`` tokens read left to right
    as an operator product.

    >>> normal_order([(0, False), (0, True)], 1)
    BosonPolynomial(1, +1 +1*b0^+ b0)
    """
    out = BosonPolynomial.constant(n_modes, 1.0)
    for mode, creation in word:
        _check_mode(mode, n_modes)
        out = out * BosonPolynomial.ladder(n_modes, mode, bool(creation))
    return out


# -- coefficient layout ---------------------------------------------------


@lru_cache(maxsize=None)
def monomials_of_degree(n_modes: int, degree: int) -> Tuple[Monomial, ...]:
    """All monomials of the given total degree in canonical order."""
    out = []
    for exps in itertools.product(range(degree + 1), repeat=2 * n_modes):
        if sum(exps) != degree:
            continue
        out.append(tuple(zip(exps[:n_modes], exps[n_modes:])))
    return tuple(sorted(out, key=monomial_sort_key))


@lru_cache(maxsize=None)
def coefficient_layout(n_modes: int, degrees: Tuple[int, ...]) -> Tuple[Monomial, ...]:
    layout = []
    for d in sorted(set(degrees)):
        if not 0 <= d <= 4:
            raise ValueError("degrees must lie in 0..4")
        layout.extend(monomials_of_degree(n_modes, d))
    return tuple(layout)


def extract_coeffs(p: BosonPolynomial, degrees: Iterable[int]) -> np.ndarray:
    """Coefficient vector over every monomial whose degree is in ``degrees``."""
    layout = coefficient_layout(p.n_modes, tuple(sorted(set(degrees))))
    return np.array([p.terms.get(m, 0.0) for m in layout])


def poly_from_coeffs(vec: np.ndarray, n_modes: int, degrees: Iterable[int]) -> BosonPolynomial:
    layout = coefficient_layout(n_modes, tuple(sorted(set(degrees))))
    if len(vec) != len(layout):
        raise ValueError("coefficient vector does not match layout")
    return BosonPolynomial(n_modes, dict(zip(layout, (float(v) for v in vec))))


# -- vibrational Hamiltonians --------------------------------------------


def _symmetrize(n_modes: int, entries: Iterable[Sequence[float]], order: int):
    sums: Dict[Tuple[int, ...], float] = {}
    for entry in entries:
        *idx, value = entry
        if len(idx) != order:
            raise ValueError(f"expected {order} indices, got {entry}")
        idx = tuple(int(i) for i in idx)
        for i in idx:
            _check_mode(i, n_modes)
        key = tuple(sorted(idx))
        sums[key] = sums.get(key, 0.0) + _check_real(value)
    return {k: v / _n_permutations(k) for k, v in sums.items() if v != 0.0}


def _n_permutations(key: Tuple[int, ...]) -> int:
    n = math.factorial(len(key))
    for i in set(key):
        n //= math.factorial(key.count(i))
    return n


@dataclass(frozen=True)
class VibrationalHamiltonian:
    """Harmonic frequencies plus symmetrized cubic/quartic force constants (cm^-1).

    ``cubic`` and ``quartic`` map sorted index tuples to the symmetrized value,
    i.e. the raw entries summed over the multiset and divided by its
    permutation count.  Use :meth:`from_raw` to ingest unsymmetrized entries.
    """

    n_modes: int
    omega: Tuple[float, ...]
    cubic: Mapping[Tuple[int, int, int], float] = field(default_factory=dict)
    quartic: Mapping[Tuple[int, int, int, int], float] = field(default_factory=dict)

    def __post_init__(self):
        if len(self.omega) != self.n_modes:
            raise ValueError("omega length must equal n_modes")

    @classmethod
    def from_raw(cls, omega, cubic=(), quartic=()):
        omega = tuple(float(w) for w in omega)
        n = len(omega)
        return cls(n, omega, _symmetrize(n, cubic, 3), _symmetrize(n, quartic, 4))

    def v3(self, i, j, k) -> float:
        return self.cubic.get(tuple(sorted((i, j, k))), 0.0)

    def v4(self, i, j, k, l) -> float:
        return self.quartic.get(tuple(sorted((i, j, k, l))), 0.0)

    @classmethod
    def from_json(cls, data: dict) -> "VibrationalHamiltonian":
        units = data.get("units", "cm-1")
        if units != "cm-1":
            raise ValueError(f"unsupported units {units!r}")
        h = cls.from_raw(data["omega"], data.get("cubic", []), data.get("quartic", []))
        if h.n_modes != int(data["n_modes"]):
            raise ValueError("n_modes does not match omega length")
        return h

    def to_json(self) -> dict:
        return {
            "n_modes": self.n_modes,
            "units": "cm-1",
            "omega": list(self.omega),
            "cubic": [[*k, v * _n_permutations(k)] for k, v in sorted(self.cubic.items())],
            "quartic": [[*k, v * _n_permutations(k)] for k, v in sorted(self.quartic.items())],
        }


def build_hamiltonian(h: VibrationalHamiltonian) -> BosonPolynomial:
    """Normal-ordered ladder-operator form of the quartic force-field Hamiltonian.

    H = sum_i w_i (n_i + 1/2) + sum_ijk V3_ijk q_i q_j q_k + sum_ijkl V4_ijkl q_i q_j q_k q_l
    """
    n = h.n_modes
    q = [BosonPolynomial.position(n, i) for i in range(n)]
    out = BosonPolynomial.zero(n)
    for i, w in enumerate(h.omega):
        out = out + (BosonPolynomial.number(n, i) + 0.5) * w
    for table in (h.cubic, h.quartic):
        for key, value in table.items():
            term = BosonPolynomial.constant(n, value * _n_permutations(key))
            for i in key:
                term = term * q[i]
            out = out + term
    return out.hermitian_part()
