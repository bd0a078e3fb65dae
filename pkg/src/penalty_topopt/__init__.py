"""Penalty-method topology optimization for compliant mechanisms and heat
dissipation on structured grids."""

__version__ = "0.1.0"

from .errors import AssemblyError, ConfigurationError, DomainError, SolverError
from .grid import BoundarySegment, BoundarySpec, Grid, GridSpec, build_grid, resolve_boundary
from .material import ElasticMaterial, GmifParams, HeatMaterial, gmif_deriv, gmif_eval
from .objective import HeatTransfer, Mechanism, ObjectiveBreakdown, PenaltyParams
from .optimizer import IterateRecord, optimize, optimize_heat, optimize_mech, project_volume
from .perimeter import KernelSpec, convolve, perimeter_value
from .problems import (ProblemConfig, heat_benchmark, load_config, model_problem_1,
                       model_problem_2, save_config)

__all__ = [
    "AssemblyError", "BoundarySegment", "BoundarySpec", "ConfigurationError", "DomainError",
    "ElasticMaterial", "GmifParams", "Grid", "GridSpec", "HeatMaterial", "HeatTransfer",
    "IterateRecord", "KernelSpec", "Mechanism", "ObjectiveBreakdown", "PenaltyParams",
    "ProblemConfig", "SolverError", "build_grid", "convolve", "gmif_deriv", "gmif_eval",
    "heat_benchmark", "load_config", "model_problem_1", "model_problem_2", "optimize",
    "optimize_heat", "optimize_mech", "perimeter_value", "project_volume", "resolve_boundary",
    "save_config",
]
