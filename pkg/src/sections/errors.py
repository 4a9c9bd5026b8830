"""Exception types shared across the package.

Every numerical failure mode gets its own class so callers (and the CLI's
exit-code mapping) can react to specific conditions instead of parsing
messages.
"""


class SectionError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(SectionError):
    """An evaluator was queried outside its domain (singular point, x = 0, ...)."""


class NonDecayError(SectionError):
    """The smoothness-modulus objective is still growing at the edge of the
    search window, so the supremum was not attained inside it."""


class RangeError(SectionError):
    """A target value left the range of a monotone derivative during
    bracketing (e.g. profiles with bounded slope)."""


class NonConvergenceError(SectionError):
    """An iterative solve hit its iteration cap without meeting tolerance."""


class DegenerateCurvatureError(SectionError):
    """A second derivative at the section apex is (numerically) zero, so the
    whitening map cannot be built."""


class CurvatureError(SectionError):
    """The apex Hessian of a star body is degenerate or unstable: vanishing
    curvature, or a non-smooth gauge at the apex."""


class NotTouchingError(SectionError):
    """The supplied linear functional does not attain a strict maximum on the
    body at the requested boundary point."""


class QuadratureFailure(SectionError):
    """Adaptive quadrature exceeded its maximum refinement depth."""


class MassEscapeError(SectionError):
    """A density's tail decays too slowly to truncate: the integrand is not
    negligible at the quadrature boundary."""


class AcceptanceTooLowError(SectionError):
    """Rejection sampling acceptance rate fell below the feasibility floor."""


class ConfigError(SectionError):
    """An experiment configuration could not be validated."""
