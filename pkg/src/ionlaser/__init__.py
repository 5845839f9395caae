"""Three-level single-ion phonon laser: master-equation model and diagnostics."""

__version__ = "0.1.0"

from .lindblad import Liouvillian, ModelParams, build_hamiltonian, build_liouvillian
from .observables import (
    characteristic_function,
    g2_tau,
    g2_zero,
    partial_trace_internal,
    phonon_number_distribution,
    poisson_fit,
    wigner,
)
from .phase_map import SweepConfig, classify, sweep, threshold_L1, boundary_L2
from .quantum_core import DensityMatrix, LevelIndex, Operator, SpaceDims, validate_state
from .solvers import evolve, propagate_matrix, steady_state, truncation_leak
from .tomography import TomographyPlan, displacement, measure_Z, run_tomography

__all__ = [
    "DensityMatrix", "LevelIndex", "Liouvillian", "ModelParams", "Operator", "SpaceDims",
    "SweepConfig", "TomographyPlan", "boundary_L2", "build_hamiltonian", "build_liouvillian",
    "characteristic_function", "classify", "displacement", "evolve", "g2_tau", "g2_zero",
    "measure_Z", "partial_trace_internal", "phonon_number_distribution", "poisson_fit",
    "propagate_matrix", "run_tomography", "steady_state", "sweep", "threshold_L1",
    "truncation_leak", "validate_state", "wigner",
]
