"""Wasserstein gradient flow of entropy with moving boundary atoms on the line."""

from .analysis import (
    CertificateReport,
    certify_trajectory,
    contraction_check,
    convergence_study,
    energy_identity_residual,
    equicontinuity_check,
    evi_check,
    metric_derivative,
    weak_form_residual,
)
from .energy import displacement_convexity_gap, energy, energy_value, slope
from .errors import (
    ConfigError,
    ConvergenceError,
    DomainCollapseError,
    InvalidMeasureError,
    NotRegularError,
    PdeAbortError,
    WGFError,
)
from .jko import SolverConfig, Trajectory, jko_step, run_trajectory
from .measures import GMeasure, ModelParams, QuantileRep, from_quantile, make_equilibrium, make_uniform, to_quantile
from .reference_pde import PdeConfig, pde_solve
from .testfunctions import TestFunction
from .transport import kantorovich_potential, optimal_map, w2, w2_squared

__version__ = "0.1.0"

__all__ = [
    "CertificateReport",
    "ConfigError",
    "ConvergenceError",
    "DomainCollapseError",
    "GMeasure",
    "InvalidMeasureError",
    "ModelParams",
    "NotRegularError",
    "PdeAbortError",
    "PdeConfig",
    "QuantileRep",
    "SolverConfig",
    "TestFunction",
    "Trajectory",
    "WGFError",
    "certify_trajectory",
    "contraction_check",
    "convergence_study",
    "displacement_convexity_gap",
    "energy",
    "energy_identity_residual",
    "energy_value",
    "equicontinuity_check",
    "evi_check",
    "from_quantile",
    "jko_step",
    "kantorovich_potential",
    "make_equilibrium",
    "make_uniform",
    "metric_derivative",
    "optimal_map",
    "pde_solve",
    "run_trajectory",
    "slope",
    "to_quantile",
    "w2",
    "w2_squared",
    "weak_form_residual",
]
