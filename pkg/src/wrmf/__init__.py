"""Mean-field Widom-Rowlinson model.

Special functions, the free-energy landscape, phase diagram, equations of
state and finite-volume partition functions for the two-component gas with
Curie-Weiss repulsion between unlike particles.
"""

from wrmf.errors import AmbiguityError, CriticalPointError, DomainError, NumericalError
from wrmf.special import f, lambert_w0, u, u_free, u_prime, x_of_u
from wrmf.landscape import (
    E,
    E1,
    E2,
    LandscapeSolution,
    ModelParams,
    c,
    find_fixed_points,
    global_maximizers,
    w,
)
from wrmf.finite_volume import (
    E_V,
    F_derivatives,
    F_Lambda,
    correlation_fn,
    effective_mu,
    f_V,
    log_Xi_integral,
    log_Xi_series,
    u_V,
)
from wrmf.phase import (
    EosPoint,
    OneComponentParams,
    PhaseClass,
    SpinodalPoint,
    classify,
    critical_isotherm,
    maxwell_check,
    one_component_density,
    one_component_pressure,
    order_parameter,
    psi,
    spinodal_eta,
    two_component_eos,
)

__version__ = "0.1.0"

__all__ = [
    "AmbiguityError",
    "CriticalPointError",
    "DomainError",
    "NumericalError",
    "f",
    "lambert_w0",
    "u",
    "u_free",
    "u_prime",
    "x_of_u",
    "E",
    "E1",
    "E2",
    "LandscapeSolution",
    "ModelParams",
    "c",
    "find_fixed_points",
    "global_maximizers",
    "w",
    "E_V",
    "F_derivatives",
    "F_Lambda",
    "correlation_fn",
    "effective_mu",
    "f_V",
    "log_Xi_integral",
    "log_Xi_series",
    "u_V",
    "EosPoint",
    "OneComponentParams",
    "PhaseClass",
    "SpinodalPoint",
    "classify",
    "critical_isotherm",
    "maxwell_check",
    "one_component_density",
    "one_component_pressure",
    "order_parameter",
    "psi",
    "spinodal_eta",
    "two_component_eos",
]
