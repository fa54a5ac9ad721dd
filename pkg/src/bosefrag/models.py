"""Model Hamiltonians: the tropolone double well and synthetic quartic force fields."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .boson_algebra import BosonPolynomial, VibrationalHamiltonian


@dataclass(frozen=True)
class TropoloneModel:
    """Proton-transfer double well in dimensionless coordinates (x, y).

    V(x, y) = wx/(8 x0) (x - x0)^2 (x + x0)^2 + wy/2 [y + alpha (x^2 - x0^2)]^2

    with kinetic energy wx/2 px^2 + wy/2 py^2.  Energies in cm^-1.
    """

    omega_x: float = 3594.0
    omega_y: float = 414.0
    x0: float = 3.15
    alpha: float = 0.301

    def __post_init__(self):
        if self.omega_x <= 0 or self.omega_y <= 0:
            raise ValueError("frequencies must be positive")
        if self.x0 == 0:
            raise ValueError("x0 must be nonzero")

    def potential(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        well = self.omega_x / (8 * self.x0) * (x - self.x0) ** 2 * (x + self.x0) ** 2
        return well + 0.5 * self.omega_y * (y + self.alpha * (x ** 2 - self.x0 ** 2)) ** 2

    def barrier_height(self) -> float:
        """Saddle (x=0, y=alpha x0^2) minus the well bottom (x=-x0, y=0)."""
        saddle = self.potential(0.0, self.alpha * self.x0 ** 2)
        return float(saddle - self.potential(-self.x0, 0.0))

    @property
    def quartic_x_coefficient(self) -> float:
        """Coefficient of x^4 in V."""
        return self.omega_x / (8 * self.x0) + 0.5 * self.omega_y * self.alpha ** 2

    @property
    def initial_displacement(self) -> np.ndarray:
        """Coherent-state amplitudes centering the vacuum at (x, y) = (-x0, 0)."""
        return np.array([-self.x0 / np.sqrt(2.0), 0.0])


def build_tropolone(m: TropoloneModel = TropoloneModel()) -> BosonPolynomial:
    """Normal-ordered ladder polynomial for kinetic + potential energy (mode 0 = x, 1 = y)."""
    n = 2
    x = BosonPolynomial.position(n, 0)
    y = BosonPolynomial.position(n, 1)
    x2 = x * x
    d = x2 - m.x0 ** 2
    well = d * d * (m.omega_x / (8 * m.x0))
    s = y + d * m.alpha
    bond = s * s * (0.5 * m.omega_y)
    kinetic = (BosonPolynomial.momentum_squared(n, 0) * (0.5 * m.omega_x)
               + BosonPolynomial.momentum_squared(n, 1) * (0.5 * m.omega_y))
    return kinetic + well + bond


def synthetic_quartic(n_modes: int, seed: int) -> VibrationalHamiltonian:
    """Random bound quartic force field with molecule-like magnitudes (cm^-1).

    Diagonal quartic constants are positive and cubic ones small enough that
    every one-mode cut keeps a single well.
    """
    if not 1 <= n_modes <= 4:
        raise ValueError("n_modes must be between 1 and 4")
    rng = np.random.default_rng(seed)
    omega = np.sort(rng.uniform(900.0, 3200.0, n_modes))[::-1]
    cubic, quartic = [], []
    for i in range(n_modes):
        cubic.append([i, i, i, rng.uniform(-60.0, 60.0)])
        quartic.append([i, i, i, i, rng.uniform(5.0, 25.0)])
        for j in range(i):
            cubic.append([i, i, j, rng.uniform(-20.0, 20.0)])
            cubic.append([i, j, j, rng.uniform(-20.0, 20.0)])
            quartic.append([i, i, j, j, rng.uniform(0.0, 8.0)])
    return VibrationalHamiltonian.from_raw(omega.tolist(), cubic, quartic)
