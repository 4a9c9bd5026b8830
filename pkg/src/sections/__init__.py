"""Gaussian normalization of far-out sections of log-concave product
densities and star-shaped densities, with numerical verification tools."""

from .comparison import (BoxGrid, GaussComparison, ShellGrid, adaptive_simpson,
                         gauss_compare, ks_distance, ks_empirical)
from .conditional import (ConditionalLaw, conditional_density, conditional_mc,
                          ks_to_moment_normal)
from .errors import (AcceptanceTooLowError, ConfigError, CurvatureError,
                     DegenerateCurvatureError, DomainError, MassEscapeError,
                     NonConvergenceError, NonDecayError, NotTouchingError,
                     QuadratureFailure, RangeError, SectionError)
from .product import (Direction, ProductDensity, SectionFrame, build_frame,
                      frame_from_dict, frame_to_dict, section_error,
                      solve_lagrange)
from .profiles import (ConvexProfile, RadialProfile, check_product_conditions,
                       check_radial_conditions, modulus_xi,
                       parse_profile_spec, parse_radial_spec, profile_eval,
                       power_validity_radius)
from .star import (CrossValidationReport, OrliczFunction, StarBody, StarFrame,
                   apex_frame, cross_validate_lp, minkowski_eval,
                   parse_body_spec, star_convergence_sweep, star_frame_at)

__version__ = "0.1.0"

__all__ = [
    "AcceptanceTooLowError", "BoxGrid", "ConditionalLaw", "ConfigError",
    "ConvexProfile", "CrossValidationReport", "CurvatureError",
    "DegenerateCurvatureError", "Direction", "DomainError", "GaussComparison",
    "MassEscapeError", "NonConvergenceError", "NonDecayError",
    "NotTouchingError", "OrliczFunction", "ProductDensity",
    "QuadratureFailure", "RadialProfile", "RangeError", "SectionError",
    "SectionFrame", "ShellGrid", "StarBody", "StarFrame", "adaptive_simpson",
    "apex_frame", "build_frame", "check_product_conditions",
    "check_radial_conditions", "conditional_density", "conditional_mc",
    "cross_validate_lp", "frame_from_dict", "frame_to_dict", "gauss_compare",
    "ks_distance", "ks_empirical", "ks_to_moment_normal", "minkowski_eval",
    "modulus_xi", "parse_body_spec", "parse_profile_spec", "parse_radial_spec",
    "power_validity_radius", "profile_eval", "section_error", "solve_lagrange",
    "star_convergence_sweep", "star_frame_at",
]
