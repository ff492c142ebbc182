"""Single-scale periodic cells from optimal rank-3 laminates.

Pipeline: optimal laminate moments for a set of weighted stress cases,
reconstruction of a rank-3 laminate, mapping onto a periodic parallelogram
cell, periodic homogenization, and inverse-homogenization refinement.
"""
from .laminate import LoadSet, MaterialPair, MomentVector, StressCase, complementary_energy
from .moments import MomentSolution, grid_search_oracle, optimize_moments
from .reconstruct import Rank3Laminate, reconstruct
from .unitcell import DensityField, ParallelogramCell, build_cell, map_laminate, width_bisection
from .homogenize import HomogenizedTensor, PeriodicMesh, homogenize, objective_and_sensitivities
from .topopt import TopOptConfig, optimize, starting_guess
from .experiments import ExperimentConfig, run_sweep

__all__ = [
    "LoadSet", "MaterialPair", "MomentVector", "StressCase", "complementary_energy",
    "MomentSolution", "grid_search_oracle", "optimize_moments",
    "Rank3Laminate", "reconstruct",
    "DensityField", "ParallelogramCell", "build_cell", "map_laminate", "width_bisection",
    "HomogenizedTensor", "PeriodicMesh", "homogenize", "objective_and_sensitivities",
    "TopOptConfig", "optimize", "starting_guess",
    "ExperimentConfig", "run_sweep",
]
