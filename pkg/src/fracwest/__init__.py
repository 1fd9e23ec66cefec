"""Trapezoidal/convolution-quadrature solver for the Westervelt equation
with time-fractional damping."""

__version__ = "0.1.0"

from .cq import CqScheme, bdf2_delta, convolve, correction_weights, cq_weights, positivity_form
from .errors import ErrorReport, Manufactured2D, energy_error, fit_slope, max_l2_error
from .exceptions import (
    BreakdownError,
    ConfigError,
    DegeneracyError,
    DomainError,
    FracWestError,
    NewtonDivergenceError,
    NotSPDError,
)
from .fem import FeSpace, Mesh, build_space, interval_mesh, l2_project, square_mesh
from .kernels import KernelSpec, MlParams, beta_eval, beta_hat, beta_integral, gamma_weight, ml_eval
from .stepper import RunConfig, SimState, Trajectory, advance, initialize, run

__all__ = [
    "KernelSpec", "MlParams", "ml_eval", "beta_eval", "beta_integral", "beta_hat", "gamma_weight",
    "CqScheme", "bdf2_delta", "cq_weights", "correction_weights", "convolve", "positivity_form",
    "Mesh", "FeSpace", "interval_mesh", "square_mesh", "build_space", "l2_project",
    "RunConfig", "SimState", "Trajectory", "initialize", "advance", "run",
    "ErrorReport", "Manufactured2D", "energy_error", "max_l2_error", "fit_slope",
    "FracWestError", "DomainError", "ConfigError", "NotSPDError", "BreakdownError",
    "DegeneracyError", "NewtonDivergenceError",
]
