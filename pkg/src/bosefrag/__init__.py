"""Bosonic Hamiltonian fragmentation, Fock-space simulation and gate compilation."""

__version__ = "0.1.0"

from .boson_algebra import BosonPolynomial, VibrationalHamiltonian, build_hamiltonian, normal_order
from .bogoliubov import (BogoliubovGenerator, BogoliubovTransform, apply_transform,
                         bloch_messiah, diagonalize_quadratic, exp_generator, log_transform)
from .fragmentation import FragmentSet, OptimizerOptions, QuarticFragment, gfro_decompose
from .fock_sim import (FockBasis, evolve_exact, evolve_trotter, heff_eigenvalues,
                       prepare_displaced_vacuum, to_matrix, tunneling_period)
from .gate_compiler import Gate, GateCircuit, compile_fragment_set, compile_fragment_step
from .models import TropoloneModel, build_tropolone, synthetic_quartic
from .qubit_compare import boson_to_qubit_direct, compare, sorted_insertion

__all__ = [
    "BosonPolynomial", "VibrationalHamiltonian", "build_hamiltonian", "normal_order",
    "BogoliubovGenerator", "BogoliubovTransform", "apply_transform", "bloch_messiah",
    "diagonalize_quadratic", "exp_generator", "log_transform",
    "FragmentSet", "OptimizerOptions", "QuarticFragment", "gfro_decompose",
    "FockBasis", "evolve_exact", "evolve_trotter", "heff_eigenvalues",
    "prepare_displaced_vacuum", "to_matrix", "tunneling_period",
    "Gate", "GateCircuit", "compile_fragment_set", "compile_fragment_step",
    "TropoloneModel", "build_tropolone", "synthetic_quartic",
    "boson_to_qubit_direct", "compare", "sorted_insertion",
]
