"""Desk-scale 2D chemotaxis-fluid simulator and estimate-verification harness."""

from .grid import DomainSpec, ScalarField, VectorField, integrate, lp_norm
from .stepper import Params, SimState, StepReport, stable_dt, step
from .spectral import SpectralBasis, neumann_spectral_basis, fractional_power_apply

__version__ = "0.1.0"

__all__ = [
    "DomainSpec",
    "ScalarField",
    "VectorField",
    "integrate",
    "lp_norm",
    "Params",
    "SimState",
    "StepReport",
    "stable_dt",
    "step",
    "SpectralBasis",
    "neumann_spectral_basis",
    "fractional_power_apply",
    "__version__",
]
