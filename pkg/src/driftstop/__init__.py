"""Optimal selling of an asset whose drift is unknown and learned from its price."""
from .errors import DriftStopError
from .filtering import (
    DispersionEvaluator,
    FilterModel,
    dispersion,
    invert_mean,
    moment_inequality_value,
    posterior_mean,
    posterior_moment,
)
from .integral import ResidualReport, gaussian_law, ie_rhs_term, residual, solve_fixed_point
from .pde import (
    Boundary,
    GridSpec,
    ValueSurface,
    check_smooth_fit,
    default_grid,
    euler_lattice_value,
    initial_value,
    solve_value,
    value_at,
)
from .priors import (
    Discrete,
    Normal,
    Quadrature,
    TwoPoint,
    epsilon_extension,
    quadrature_prior,
    raw_moment,
    shift_prior,
    support_interval,
    validate,
)
from .simulate import (
    BoundaryRule,
    Estimate,
    Immediate,
    SimConfig,
    Terminal,
    ZeroOrT,
    improvement,
    naive_value,
    simulate_value_P,
    simulate_value_Q,
)

__version__ = "0.1.0"

__all__ = [
    "DriftStopError",
    "DispersionEvaluator",
    "FilterModel",
    "dispersion",
    "invert_mean",
    "moment_inequality_value",
    "posterior_mean",
    "posterior_moment",
    "ResidualReport",
    "gaussian_law",
    "ie_rhs_term",
    "residual",
    "solve_fixed_point",
    "Boundary",
    "GridSpec",
    "ValueSurface",
    "check_smooth_fit",
    "default_grid",
    "euler_lattice_value",
    "initial_value",
    "solve_value",
    "value_at",
    "Discrete",
    "Normal",
    "Quadrature",
    "TwoPoint",
    "epsilon_extension",
    "quadrature_prior",
    "raw_moment",
    "shift_prior",
    "support_interval",
    "validate",
    "BoundaryRule",
    "Estimate",
    "Immediate",
    "SimConfig",
    "Terminal",
    "ZeroOrT",
    "improvement",
    "naive_value",
    "simulate_value_P",
    "simulate_value_Q",
]
