"""Plaque-growth fluid-structure interaction on a 2D reference cylinder."""

from .coupling import CouplingParams, picard_solve
from .geometry import ReferenceGrid, build_reference_domain
from .heat import HeatProblem, solve_coupled_concentrations, solve_heat_neumann
from .report import CompatibilityError, ConditionReport
from .stokes import StokesParams, StokesProblem, solve_two_phase

__all__ = [
    "CompatibilityError",
    "ConditionReport",
    "CouplingParams",
    "HeatProblem",
    "ReferenceGrid",
    "StokesParams",
    "StokesProblem",
    "build_reference_domain",
    "picard_solve",
    "solve_coupled_concentrations",
    "solve_heat_neumann",
    "solve_two_phase",
]
