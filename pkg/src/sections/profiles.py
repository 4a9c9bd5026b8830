"""One-dimensional convex profiles g and radial profiles rho.

A convex profile carries evaluators for g, g', g'', g''' and is the basic
ingredient of a product density exp(-sum g_i(x_i)). A radial profile carries
rho, rho', rho'' and drives star-shaped densities exp(-rho(||x||_K)).

The module also provides the third-order smoothness modulus

    xi_g(r, t) = sup { |g'''(w+s)| / g''(w)^{3/2} :
                       |w| >= t,  |s| <= r * g''(w)^{-1/2} }

which controls how close to quadratic g looks near a far-out section apex,
plus grid diagnostics for the growth/balance hypotheses the section theorems
need.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, NonDecayError

_FD_REL_TOL = 1e-6          # registration-time derivative consistency
_FD_POINTS = (-2.7, -1.3, -0.6, 0.45, 0.8, 1.7, 3.1)  # generic sample points


def _as_array(t):
    return np.asarray(t, dtype=float)


def _check_derivative_chain(evals, points, rel_tol=_FD_REL_TOL, lowest=0):
    """Verify that evals[k+1] is the derivative of evals[k] at the sample
    points, by central differences. Raises DomainError on mismatch."""
    pts = np.asarray(points, dtype=float)
    h = 1e-5 * (1.0 + np.abs(pts))
    for k in range(lowest, len(evals) - 1):
        with np.errstate(all="ignore"):
            fd = (evals[k](pts + h) - evals[k](pts - h)) / (2.0 * h)
            ref = evals[k + 1](pts)
        ok = np.isfinite(fd) & np.isfinite(ref)
        if not np.all(ok):
            raise DomainError(
                f"derivative order {k + 1} not finite at sample points")
        err = np.abs(fd - ref)
        scale = 1.0 + np.abs(ref)
        if np.any(err > rel_tol * scale):
            worst = float(np.max(err / scale))
            raise DomainError(
                f"evaluator for derivative order {k + 1} disagrees with the "
                f"finite difference of order {k} (relative error {worst:.3e})")


class ConvexProfile:
    """A scalar C^3 convex profile with derivative evaluators up to order 3.

    Construct through the factory classmethods ``power``, ``cosh``,
    ``gaussian`` or ``custom``. Evaluators are vectorized over numpy arrays.
    """

    def __init__(self, tag, evals, validate=False, sample_points=_FD_POINTS):
        self.tag = tag
        self._evals = tuple(evals)
        if validate:
            _check_derivative_chain(self._evals, sample_points)

    def __repr__(self):
        return f"ConvexProfile({self.tag!r})"

    @classmethod
    def power(cls, p: float) -> "ConvexProfile":
        """g(t) = |t|^p with p > 1."""
        if not p > 1.0:
            raise DomainError(f"power profile needs p > 1, got {p}")
        p = float(p)

        def g0(t):
            return np.abs(_as_array(t)) ** p

        def g1(t):
            t = _as_array(t)
            return p * np.sign(t) * np.abs(t) ** (p - 1.0)

        def g2(t):
            t = _as_array(t)
            with np.errstate(divide="ignore"):
                return p * (p - 1.0) * np.abs(t) ** (p - 2.0)

        def g3(t):
            t = _as_array(t)
            with np.errstate(divide="ignore", invalid="ignore"):
                return p * (p - 1.0) * (p - 2.0) * np.sign(t) * np.abs(t) ** (p - 3.0)

        prof = cls(f"power:{p:g}", (g0, g1, g2, g3))
        prof.p = p
        return prof

    @classmethod
    def cosh(cls) -> "ConvexProfile":
        """g(t) = e^t + e^(-t)."""

        def even(t):
            t = _as_array(t)
            with np.errstate(over="ignore"):
                return np.exp(t) + np.exp(-t)

        def odd(t):
            t = _as_array(t)
            with np.errstate(over="ignore"):
                return np.exp(t) - np.exp(-t)

        return cls("cosh", (even, odd, even, odd))

    @classmethod
    def gaussian(cls) -> "ConvexProfile":
        """g(t) = t^2 / 2."""
        return cls("gaussian", (
            lambda t: 0.5 * _as_array(t) ** 2,
            lambda t: _as_array(t) * 1.0,
            lambda t: np.ones_like(_as_array(t)),
            lambda t: np.zeros_like(_as_array(t)),
        ))

    @classmethod
    def custom(cls, g, g1, g2, g3, tag="custom",
               sample_points=_FD_POINTS) -> "ConvexProfile":
        """Register user-supplied analytic evaluators.

        The four callables must be consistent as a derivative chain; this is
        checked against central finite differences at the sample points and a
        mismatch raises DomainError. Callables may be scalar-only; they are
        wrapped for array inputs.
        """
        evals = tuple(_vectorize_if_needed(f) for f in (g, g1, g2, g3))
        return cls(tag, evals, validate=True, sample_points=sample_points)

    def reflected(self) -> "ConvexProfile":
        """The profile t -> g(-t) (derivatives pick up alternating signs)."""
        e = self._evals
        return ConvexProfile(f"reflect({self.tag})", (
            lambda t: e[0](-_as_array(t)),
            lambda t: -e[1](-_as_array(t)),
            lambda t: e[2](-_as_array(t)),
            lambda t: -e[3](-_as_array(t)),
        ))

    # Raw vectorized access; may return inf/nan at singular points.
    def d(self, order: int):
        return self._evals[order]

    def eval(self, t: float, order: int) -> float:
        """Scalar evaluation with domain checking (see ``profile_eval``)."""
        if order not in (0, 1, 2, 3):
            raise DomainError(f"derivative order must be in 0..3, got {order}")
        with np.errstate(all="ignore"):
            val = float(self._evals[order](float(t)))
        if not np.isfinite(val):
            raise DomainError(
                f"order-{order} derivative of {self.tag} is singular at t={t}")
        return val


def _vectorize_if_needed(f):
    def wrapped(t):
        t = _as_array(t)
        try:
            out = np.asarray(f(t), dtype=float)
            if out.shape == t.shape:
                return out
        except Exception:
            pass
        return np.vectorize(f, otypes=[float])(t)
    return wrapped


def profile_eval(profile: ConvexProfile, t: float, order: int) -> float:
    """Evaluate the order-th derivative of g at t. DomainError at singular
    points (e.g. the third derivative of power(2.5) at 0)."""
    return profile.eval(t, order)


class RadialProfile:
    """A scalar radial profile rho on [0, inf) with rho', rho'' evaluators."""

    def __init__(self, tag, evals, t_min=0.0, validate=False,
                 sample_points=(0.35, 0.8, 1.6, 2.9, 4.2)):
        self.tag = tag
        self._evals = tuple(evals)
        self.t_min = float(t_min)
        if validate:
            _check_derivative_chain(self._evals, sample_points)
            pts = np.asarray(sample_points, dtype=float)
            pts = pts[pts > self.t_min]
            if np.any(self._evals[1](pts) <= 0.0):
                raise DomainError(
                    f"rho' must be positive beyond t_min={self.t_min}")

    def __repr__(self):
        return f"RadialProfile({self.tag!r})"

    @classmethod
    def power(cls, p: float) -> "RadialProfile":
        """rho(t) = t^p."""
        p = float(p)
        if not p > 0:
            raise DomainError(f"radial power needs p > 0, got {p}")
        return cls(f"power:{p:g}", (
            lambda t: _as_array(t) ** p,
            lambda t: p * _as_array(t) ** (p - 1.0),
            lambda t: p * (p - 1.0) * _as_array(t) ** (p - 2.0),
        ))

    @classmethod
    def half_square(cls) -> "RadialProfile":
        """rho(t) = t^2 / 2."""
        return cls("halfsquare", (
            lambda t: 0.5 * _as_array(t) ** 2,
            lambda t: _as_array(t) * 1.0,
            lambda t: np.ones_like(_as_array(t)),
        ))

    @classmethod
    def exp(cls) -> "RadialProfile":
        """rho(t) = e^t."""
        ex = lambda t: np.exp(_as_array(t))
        return cls("exp", (ex, ex, ex))

    @classmethod
    def custom(cls, rho, rho1, rho2, tag="custom", t_min=0.0,
               sample_points=(0.35, 0.8, 1.6, 2.9, 4.2)) -> "RadialProfile":
        evals = tuple(_vectorize_if_needed(f) for f in (rho, rho1, rho2))
        return cls(tag, evals, t_min=t_min, validate=True,
                   sample_points=sample_points)

    def d(self, order: int):
        return self._evals[order]

    def eval(self, t: float, order: int) -> float:
        if order not in (0, 1, 2):
            raise DomainError(f"radial order must be in 0..2, got {order}")
        if t < 0:
            raise DomainError(f"radial profiles live on [0, inf), got t={t}")
        with np.errstate(all="ignore"):
            val = float(self._evals[order](float(t)))
        if not np.isfinite(val):
            raise DomainError(
                f"order-{order} derivative of {self.tag} is singular at t={t}")
        return val


# ---------------------------------------------------------------------------
# Smoothness modulus
# ---------------------------------------------------------------------------

_W_POINTS = 512     # log-spaced w per sign
_S_POINTS = 33      # inner perturbation grid per w
_W_SPAN = 1e3       # search window [t, span*t]


def _modulus_objective(profile, w, r, s_points):
    """max over the inner s-grid of |g'''(w+s)| / g''(w)^{3/2}, per w."""
    g2 = profile.d(2)
    g3 = profile.d(3)
    with np.errstate(all="ignore"):
        g2w = np.asarray(g2(w), dtype=float)
    if np.any(~np.isfinite(g2w) & ~(g2w > 1e300)) or np.any(g2w <= 0.0):
        # Overflowed curvature is handled below; nonpositive curvature is a
        # precondition violation.
        finite_bad = np.isfinite(g2w) & (g2w <= 0.0)
        if np.any(finite_bad):
            raise DomainError(
                f"g'' must stay positive on |w| >= t for {profile.tag}")
    with np.errstate(all="ignore"):
        s_max = r / np.sqrt(g2w)
        frac = np.linspace(-1.0, 1.0, s_points)
        pts = w[:, None] + s_max[:, None] * frac[None, :]
        num = np.abs(np.asarray(g3(pts), dtype=float))
        den = g2w ** 1.5
        obj = num / den[:, None]
    # Where the curvature overflows a double, the denominator exceeds any
    # representable numerator and the objective is numerically zero.
    huge = ~np.isfinite(g2w) | (g2w > 1e300)
    obj[huge, :] = 0.0
    obj = np.where(np.isnan(obj), np.inf, obj)
    return obj.max(axis=1)


def modulus_xi(profile: ConvexProfile, r: float, t: float) -> float:
    """Evaluate the smoothness modulus xi_g(r, t) by grid search.

    The sup over |w| >= t is truncated to |w| <= 1e3 * t (both signs), with
    512 log-spaced w points per sign, a 33-point inner grid over the
    perturbation s, and one 10x refinement pass around the argmax. If the
    objective is still growing at the largest sampled w the truncation is
    unsound and NonDecayError is raised.
    """
    if not (r > 0 and t > 0):
        raise DomainError("modulus_xi needs r > 0 and t > 0")

    best = 0.0
    for sign in (1.0, -1.0):
        w = sign * np.geomspace(t, _W_SPAN * t, _W_POINTS)
        m = _modulus_objective(profile, w, r, _S_POINTS)

        # Growth detector: the branch maximum sits at the window edge and the
        # profile is still rising there.
        k = int(np.argmax(m))
        if k == _W_POINTS - 1 and m[-1] > m[-2]:
            raise NonDecayError(
                f"modulus objective for {profile.tag} still grows at "
                f"|w| = {abs(w[-1]):g}; sup not attained in the window")
        if m[-1] > m[-2] > m[-3] and m[-1] > 0.999 * m[k]:
            raise NonDecayError(
                f"modulus objective for {profile.tag} is rising at the edge "
                f"of the search window")

        # Refinement pass with 10x finer spacing around the argmax.
        lo = w[max(k - 1, 0)]
        hi = w[min(k + 1, _W_POINTS - 1)]
        w_fine = np.linspace(lo, hi, 21)
        m_fine = _modulus_objective(profile, w_fine, r, 10 * _S_POINTS - 1)
        best = max(best, float(m.max()), float(m_fine.max()))
    return best


def power_validity_radius(p: float, t: float) -> float:
    """Conservative validity radius for the closed-form |t|^p modulus bound:
    the bound 2 t^(-p/2) is asserted only for r <= t^(p/2) / 4."""
    return t ** (p / 2.0) / 4.0


# ---------------------------------------------------------------------------
# Hypothesis diagnostics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PairBalanceCheck:
    """One derivative-balance comparison: g_i'(t) must lie strictly between
    g_j' evaluated at t scaled toward and away from zero."""
    i: int
    j: int
    t: float
    lower: float
    value: float
    upper: float
    ok: bool


@dataclass(frozen=True)
class GrowthCheck:
    """One curvature-growth comparison: g_i''(t) > omega * g_i'(t) / t."""
    i: int
    t: float
    curvature: float
    threshold: float
    ok: bool


@dataclass(frozen=True)
class ProductConditionsReport:
    passed: bool
    balance: list = field(default_factory=list)
    growth: list = field(default_factory=list)
    first_violation: object = None


def check_product_conditions(profiles, sigma: float, omega: float,
                             t0: float, t_grid) -> ProductConditionsReport:
    """Grid diagnostics for the two product-theorem hypotheses.

    For every ordered pair (i, j) and each grid point t (checked at +|t| and
    -|t|), g_i'(t) must lie strictly between g_j'(sigma^-1 t) and
    g_j'(sigma t); for every i, t g_i''(t) must exceed omega * g_i'(t).
    A failed check is reported, not raised.
    """
    if not sigma > 1.0:
        raise DomainError(f"sigma must exceed 1, got {sigma}")
    if not omega > 0.0:
        raise DomainError(f"omega must be positive, got {omega}")
    grid = [float(t) for t in t_grid]
    if any(abs(t) <= t0 for t in grid):
        raise DomainError(f"all grid points must satisfy |t| > t0 = {t0}")

    balance, growth = [], []
    first = None
    n = len(profiles)
    signed = sorted({s * abs(t) for t in grid for s in (1.0, -1.0)})

    for t in signed:
        for i in range(n):
            vi = float(profiles[i].d(1)(t))
            for j in range(n):
                a = float(profiles[j].d(1)(t / sigma))
                b = float(profiles[j].d(1)(t * sigma))
                lo, hi = (a, b) if a <= b else (b, a)
                ok = lo < vi < hi
                rec = PairBalanceCheck(i, j, t, lo, vi, hi, ok)
                balance.append(rec)
                if not ok and first is None:
                    first = rec
        for i in range(n):
            cur = float(profiles[i].d(2)(t))
            thr = omega * float(profiles[i].d(1)(t)) / t
            ok = cur > thr
            rec = GrowthCheck(i, t, cur, thr, ok)
            growth.append(rec)
            if not ok and first is None:
                first = rec

    return ProductConditionsReport(first is None, balance, growth, first)


@dataclass(frozen=True)
class RadialConditionsReport:
    passed: bool
    t_grid: np.ndarray
    t_rho_prime: np.ndarray
    sup_ratio: np.ndarray
    increasing_ok: bool
    decreasing_ok: bool


def check_radial_conditions(rho: RadialProfile, r: float,
                            t_grid) -> RadialConditionsReport:
    """Trend diagnostics for the star-theorem hypotheses on rho.

    Along the (increasing) grid, t rho'(t) must be strictly increasing and
    sup over |s| < r / rho'(t) of |rho''(t+s)| / rho'(t)^2 must be
    non-increasing. Both trends must hold for the report to pass.
    """
    grid = np.asarray(sorted(float(t) for t in t_grid))
    if grid.size < 2:
        raise DomainError("radial condition check needs at least two grid points")
    rho1 = rho.d(1)
    rho2 = rho.d(2)
    r1 = np.asarray(rho1(grid), dtype=float)
    if np.any(r1 <= 0):
        raise DomainError("rho' must be positive on the supplied grid")
    t_r1 = grid * r1

    sup_ratio = np.empty_like(grid)
    for k, t in enumerate(grid):
        s_max = r / r1[k]
        pts = t + np.linspace(-s_max, s_max, 257)
        pts = np.clip(pts, 0.0, None)     # rho lives on [0, inf)
        with np.errstate(all="ignore"):
            vals = np.abs(np.asarray(rho2(pts), dtype=float)) / r1[k] ** 2
        vals = np.where(np.isnan(vals), np.inf, vals)
        sup_ratio[k] = vals.max()

    inc_ok = bool(np.all(np.diff(t_r1) > 1e-12 * np.abs(t_r1[:-1])))
    dec_ok = bool(np.all(np.diff(sup_ratio) <= 1e-12 * (1.0 + sup_ratio[:-1])))
    return RadialConditionsReport(inc_ok and dec_ok, grid, t_r1, sup_ratio,
                                  inc_ok, dec_ok)


# ---------------------------------------------------------------------------
# Spec-string parsing (shared by the CLI)
# ---------------------------------------------------------------------------

def parse_profile_spec(spec: str) -> ConvexProfile:
    """Parse "power:4", "cosh" or "gaussian" into a profile."""
    parts = spec.strip().split(":")
    if parts[0] == "power" and len(parts) == 2:
        return ConvexProfile.power(float(parts[1]))
    if parts[0] == "cosh" and len(parts) == 1:
        return ConvexProfile.cosh()
    if parts[0] == "gaussian" and len(parts) == 1:
        return ConvexProfile.gaussian()
    raise DomainError(f"unknown profile spec {spec!r}")


def parse_radial_spec(spec: str) -> RadialProfile:
    """Parse "power:4", "halfsquare" or "exp" into a radial profile."""
    parts = spec.strip().split(":")
    if parts[0] == "power" and len(parts) == 2:
        return RadialProfile.power(float(parts[1]))
    if parts[0] == "halfsquare" and len(parts) == 1:
        return RadialProfile.half_square()
    if parts[0] == "exp" and len(parts) == 1:
        return RadialProfile.exp()
    raise DomainError(f"unknown radial spec {spec!r}")
