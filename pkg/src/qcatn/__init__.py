"""Tensor-network simulation of a dissipative quantum cellular automaton.

Rows of qubits are updated by a three-qubit controlled gate; the density
of the row is tracked as a matrix product state of the reduced density
matrix, with statevector and mean-field references alongside.
"""
__version__ = "0.1.0"

from .analysis import ExponentBounds, FitReport, ScanResult, critical_gamma_scan, exponent_bounds, powerlaw_fit
from .evolution import DensitySeries, EvolutionConfig, RowStateMPS, evolve, evolve_many, step
from .exact import LatticeSpec, concurrence, concurrence_map, run_exact, target_pair_concurrence
from .gates import GateParams, build_G, build_G_super, decompose_gate_mpo
from .meanfield import mf_phase_boundary, mf_stationary_density, mf_trajectory

__all__ = [
    "__version__",
    "GateParams",
    "build_G",
    "build_G_super",
    "decompose_gate_mpo",
    "LatticeSpec",
    "run_exact",
    "concurrence",
    "target_pair_concurrence",
    "concurrence_map",
    "EvolutionConfig",
    "RowStateMPS",
    "DensitySeries",
    "step",
    "evolve",
    "evolve_many",
    "mf_trajectory",
    "mf_stationary_density",
    "mf_phase_boundary",
    "powerlaw_fit",
    "exponent_bounds",
    "critical_gamma_scan",
    "FitReport",
    "ExponentBounds",
    "ScanResult",
]
