"""Fibering analysis, thresholds and constrained minimization for the radial
Schrödinger-Poisson-Slater energy ``E(u) = A/2 + q B/4 - lambda C / p``."""

__version__ = "0.1.0"

from .errors import (
    ConfigurationError,
    DegenerateInputError,
    DomainError,
    InvalidInputError,
    NumericalFailure,
    PreconditionError,
    SpfiberError,
)
from .families import TrialFamily
from .fiber import (
    ExtremalPair,
    FiberClassification,
    FiberCoefficients,
    NehariMembership,
    PohozaevInput,
    classify_fiber,
    extremal_pair,
    fiber_eval,
    nehari_membership,
    pohozaev_residual,
    solve_closed_system,
)
from .hartree import hartree_energy, hartree_potential
from .inequalities import check_inequalities, check_inequality
from .minimize import (
    SolveReport,
    SweepResult,
    SweepRow,
    appendix_estimates,
    detect_unbounded,
    energy,
    minimize_nehari,
    minimize_on_sphere,
    sweep_I,
    sweep_J,
)
from .radial import Integrals, RadialFunction, RadialGrid, dilate, integrals, project_to_sphere
from .rayleigh import (
    ThresholdEstimate,
    catto_sequence,
    estimate_kgn,
    minimize_rayleigh,
    rayleigh,
    thresholds,
)

__all__ = [
    "ConfigurationError",
    "DegenerateInputError",
    "DomainError",
    "ExtremalPair",
    "FiberClassification",
    "FiberCoefficients",
    "Integrals",
    "InvalidInputError",
    "NehariMembership",
    "NumericalFailure",
    "PohozaevInput",
    "PreconditionError",
    "RadialFunction",
    "RadialGrid",
    "SolveReport",
    "SpfiberError",
    "SweepResult",
    "SweepRow",
    "ThresholdEstimate",
    "TrialFamily",
    "appendix_estimates",
    "catto_sequence",
    "check_inequalities",
    "check_inequality",
    "classify_fiber",
    "detect_unbounded",
    "dilate",
    "energy",
    "estimate_kgn",
    "extremal_pair",
    "fiber_eval",
    "hartree_energy",
    "hartree_potential",
    "integrals",
    "minimize_nehari",
    "minimize_on_sphere",
    "minimize_rayleigh",
    "nehari_membership",
    "pohozaev_residual",
    "project_to_sphere",
    "rayleigh",
    "solve_closed_system",
    "sweep_I",
    "sweep_J",
    "thresholds",
]
