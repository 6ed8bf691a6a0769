"""Normalized ground states of the biharmonic Choquard equation in R^4.

    Delta^2 u - beta Delta u = lambda u + (I_mu * F(u)) f(u),   int u^2 = c^2,

with I_mu = |x|^-mu, solved on a periodic spectral grid with a free-space
Riesz convolution.
"""

from .adams import CutoffSpec, adams_norms, c_mu, cutoff_moments, mountain_scan, normalized_adams
from .errors import (
    BichoquardError,
    BoxTooSmallError,
    ConfigError,
    FiberError,
    GridTooLargeError,
    OverflowGuardError,
    ZeroFieldError,
)
from .functional import (
    FiberDiagnostics,
    FiberMap,
    ProblemConfig,
    alpha_surface,
    energy,
    euler_gradient,
    fiber_derivative,
    fiber_maximize,
    fiber_second,
    fiber_value,
    lagrange_multiplier,
    pohozaev,
    psi_scan,
    reduced_energy,
    reduced_gradient,
)
from .grid import (
    Field,
    Grid,
    apply_operator,
    dilate,
    inner,
    load_snapshot,
    mass_sq,
    rescale_mass,
    save_snapshot,
    seminorms,
)
from .nonlin import CRITICAL_ALPHA, ConditionParams, Nonlinearity, check_conditions, parse_nonlinearity
from .riesz import RieszKernel, choquard_pairing, convolve, direct_convolve
from .solver import (
    GroundStateReport,
    SolveSettings,
    refine_check,
    scaled_state,
    solve_ground_state,
    sweep_beta,
    sweep_mass,
)
from .verify import run_verify

__all__ = [
    "BichoquardError",
    "BoxTooSmallError",
    "CRITICAL_ALPHA",
    "ConditionParams",
    "ConfigError",
    "CutoffSpec",
    "FiberDiagnostics",
    "FiberError",
    "FiberMap",
    "Field",
    "Grid",
    "GridTooLargeError",
    "GroundStateReport",
    "Nonlinearity",
    "OverflowGuardError",
    "ProblemConfig",
    "RieszKernel",
    "SolveSettings",
    "ZeroFieldError",
    "adams_norms",
    "alpha_surface",
    "apply_operator",
    "c_mu",
    "check_conditions",
    "choquard_pairing",
    "convolve",
    "cutoff_moments",
    "dilate",
    "direct_convolve",
    "energy",
    "euler_gradient",
    "fiber_derivative",
    "fiber_maximize",
    "fiber_second",
    "fiber_value",
    "inner",
    "lagrange_multiplier",
    "load_snapshot",
    "mass_sq",
    "mountain_scan",
    "normalized_adams",
    "parse_nonlinearity",
    "pohozaev",
    "psi_scan",
    "reduced_energy",
    "reduced_gradient",
    "refine_check",
    "rescale_mass",
    "run_verify",
    "save_snapshot",
    "scaled_state",
    "seminorms",
    "solve_ground_state",
    "sweep_beta",
    "sweep_mass",
    "__version__",
]

__version__ = "0.1.0"
