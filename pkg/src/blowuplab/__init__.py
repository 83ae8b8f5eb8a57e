"""blowuplab: a numerical laboratory for strongly anisotropic blow-up.

Builds the radial self-similar profile of the supercritical heat equation
by shooting, diagonalizes the linearized operators in Gaussian-weighted
spaces, constructs reconnecting profiles and their high-order boundary
layer correctors, and simulates the renormalized flow with modulation,
verifying the leading-order laws b(s) ~ 1/(c1 s), lambda(s) ~ e^{-s/2} and
the moving free boundary 1/sqrt(b) ~ c* sqrt(|log(T - t)|).
"""

from ._accel import NUMBA_ENABLED, THREADS
from .grids import CylGrid, GridFunction, LineGrid, RadialGrid, WeightKind
from .hermite import hermite_deriv, hermite_eval, hermite_norm_sq
from .profiles import (
    Profile,
    ProfileParams,
    Trajectory,
    find_profiles,
    fit_farfield,
    integrate_profile,
    kappa_profile,
    kappa_value,
    lambda_iterates,
    profile_rhs,
)
from .quadrature import coercivity_ratio, weighted_inner, weighted_norm

__version__ = "0.1.0"

__all__ = [
    "NUMBA_ENABLED",
    "THREADS",
    "RadialGrid",
    "LineGrid",
    "CylGrid",
    "GridFunction",
    "WeightKind",
    "hermite_eval",
    "hermite_deriv",
    "hermite_norm_sq",
    "weighted_inner",
    "weighted_norm",
    "coercivity_ratio",
    "Profile",
    "ProfileParams",
    "Trajectory",
    "kappa_value",
    "kappa_profile",
    "profile_rhs",
    "integrate_profile",
    "find_profiles",
    "lambda_iterates",
    "fit_farfield",
    "__version__",
]
