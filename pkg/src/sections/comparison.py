"""Shared Gaussian-comparison metrics.

Both section pipelines and the conditional law reduce to the same question:
how far is a density (given in log form) from the standard normal on a
compact region? This module provides the grids, the sup metrics, and a
1-D Kolmogorov distance computed from adaptive Simpson quadrature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, QuadratureFailure

LOG_2PI = math.log(2.0 * math.pi)


def std_normal_logpdf(x: np.ndarray) -> np.ndarray:
    """log phi_m at the rows of an (N, m) array (or an (N,) array for m=1)."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        sq = x ** 2
        m = 1
    else:
        sq = np.sum(x ** 2, axis=1)
        m = x.shape[1]
    return -0.5 * sq - 0.5 * m * LOG_2PI


# ---------------------------------------------------------------------------
# Evaluation grids
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ShellGrid:
    """Radial-shell grid on the ball ||x|| <= r: origin plus ``shells``
    equispaced radii times a deterministic low-discrepancy direction set."""
    r: float
    shells: int = 20
    directions: int = 500

    def points(self, m: int) -> np.ndarray:
        from .numerics import sphere_directions
        dirs = sphere_directions(m, self.directions)
        radii = self.r * np.arange(1, self.shells + 1) / self.shells
        pts = (radii[:, None, None] * dirs[None, :, :]).reshape(-1, m)
        return np.vstack([np.zeros((1, m)), pts])

    @property
    def max_spacing(self) -> float:
        return self.r / self.shells


@dataclass(frozen=True)
class BoxGrid:
    """Uniform product grid on a centered box [-a_1, a_1] x ... x [-a_m, a_m].

    ``halfwidth`` is a scalar (same half-width per axis) or a sequence.
    """
    halfwidth: object = 2.0
    points_per_axis: int = 21

    def axes(self, m: int):
        hw = np.asarray(self.halfwidth, dtype=float)
        if hw.ndim == 0:
            hw = np.full(m, float(hw))
        if hw.size != m:
            raise DomainError(f"box half-widths have size {hw.size}, need {m}")
        return [np.linspace(-a, a, self.points_per_axis) for a in hw]

    def points(self, m: int) -> np.ndarray:
        mesh = np.meshgrid(*self.axes(m), indexing="ij")
        return np.stack([g.ravel() for g in mesh], axis=1)

    @property
    def max_spacing(self) -> float:
        hw = np.max(np.atleast_1d(np.asarray(self.halfwidth, dtype=float)))
        return 2.0 * float(hw) / (self.points_per_axis - 1)


# ---------------------------------------------------------------------------
# Comparison report
# ---------------------------------------------------------------------------

@dataclass
class GaussComparison:
    """Deviation of a density from the standard normal on a grid.

    sup_abs is sup |density - phi|; sup_rel is sup |density/phi - 1|;
    ks_1d is the Kolmogorov distance (1-D comparisons only). The bound
    fields are filled by the product pipeline. Grid sups are lower bounds
    on the true sup; ``max_spacing`` reports the grid resolution so callers
    can budget for it.
    """
    sup_abs: float
    sup_rel: float | None = None
    ks_1d: float | None = None
    bound_surrogate: float | None = None
    bound_valid: bool | None = None
    n_points: int = 0
    max_spacing: float = float("nan")

    def __post_init__(self):
        if self.sup_abs < 0:
            raise DomainError("sup_abs must be nonnegative")
        if self.sup_rel is not None and self.sup_rel < 0:
            raise DomainError("sup_rel must be nonnegative")
        if self.ks_1d is not None and not (0.0 <= self.ks_1d <= 1.0):
            raise DomainError("ks_1d must lie in [0, 1]")


def sup_metrics(log_density: np.ndarray, log_ref: np.ndarray):
    """(sup_abs, sup_rel) between two densities given in log form."""
    log_density = np.asarray(log_density, dtype=float)
    log_ref = np.asarray(log_ref, dtype=float)
    with np.errstate(over="ignore", under="ignore"):
        rel = np.abs(np.expm1(log_density - log_ref))
        absdev = np.exp(np.clip(log_ref, -745.0, 700.0)) * rel
    return float(np.max(absdev)), float(np.max(rel))


def gauss_compare(log_density, m: int, region, ks: bool | None = None,
                  ks_bounds=None, ks_tol: float = 1e-10) -> GaussComparison:
    """Compare a log-density evaluator on R^m against the standard normal.

    ``log_density`` receives an (N, m) array and returns (N,) log values.
    ``region`` is a ShellGrid or BoxGrid. For m = 1 the Kolmogorov distance
    is also computed (after normalizing both densities by quadrature) unless
    ``ks`` is False.
    """
    pts = region.points(m)
    logd = np.asarray(log_density(pts), dtype=float)
    logphi = std_normal_logpdf(pts)
    sup_abs, sup_rel = sup_metrics(logd, logphi)

    ks_val = None
    if m == 1 and (ks is None or ks):
        if ks_bounds is None:
            extent = float(np.max(np.abs(pts)))
            ks_bounds = (-max(12.0, extent), max(12.0, extent))
        d1 = lambda x: math.exp(float(log_density(np.array([[x]]))))
        d2 = lambda x: math.exp(-0.5 * x * x - 0.5 * LOG_2PI)
        ks_val = ks_distance(d1, d2, ks_bounds[0], ks_bounds[1], tol=ks_tol)

    return GaussComparison(sup_abs=sup_abs, sup_rel=sup_rel, ks_1d=ks_val,
                           n_points=pts.shape[0],
                           max_spacing=region.max_spacing)


# ---------------------------------------------------------------------------
# Adaptive Simpson quadrature (vector integrands) and Kolmogorov distance
# ---------------------------------------------------------------------------

def adaptive_simpson(f, a: float, b: float, tol: float = 1e-10,
                     max_depth: int = 40, noise: float = 1e-14):
    """Adaptive Simpson integration of a vector-valued integrand.

    ``f`` maps a scalar to a 1-D array of components; the refinement is
    shared, an interval is accepted only when every component meets its
    local tolerance. Returns (integral, knots, increments) where ``knots``
    is the sorted array of accepted interval endpoints (including ``a``) and
    ``increments[k]`` is the integral over (knots[k], knots[k+1]).

    ``noise`` is the relative noise floor of the integrand values (values
    produced through large-exponent cancellation are only accurate to
    eps * |exponent|); without it the halving tolerance schedule can demand
    more accuracy than the data carries and refine forever.

    Raises QuadratureFailure past ``max_depth`` bisections.
    """
    a = float(a)
    b = float(b)
    fa = np.atleast_1d(np.asarray(f(a), dtype=float))
    fb = np.atleast_1d(np.asarray(f(b), dtype=float))
    mid = 0.5 * (a + b)
    fm = np.atleast_1d(np.asarray(f(mid), dtype=float))
    whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb)

    knots = [a]
    incs = []

    def recurse(x0, x2, f0, f2, f1, s, tol_local, depth):
        if depth > max_depth:
            raise QuadratureFailure(
                f"adaptive Simpson exceeded depth {max_depth} on "
                f"[{x0:g}, {x2:g}]")
        xm = 0.5 * (x0 + x2)
        xl = 0.5 * (x0 + xm)
        xr = 0.5 * (xm + x2)
        fl = np.atleast_1d(np.asarray(f(xl), dtype=float))
        fr = np.atleast_1d(np.asarray(f(xr), dtype=float))
        s_left = (xm - x0) / 6.0 * (f0 + 4.0 * fl + f1)
        s_right = (x2 - xm) / 6.0 * (f1 + 4.0 * fr + f2)
        err = s_left + s_right - s
        floor = noise * (np.abs(s_left) + np.abs(s_right) + np.abs(s))
        if np.all(np.abs(err) <= 15.0 * tol_local + floor):
            corr = err / 15.0
            knots.append(xm)
            incs.append(s_left + 0.5 * corr)
            knots.append(x2)
            incs.append(s_right + 0.5 * corr)
            return
        recurse(x0, xm, f0, f1, fl, s_left, tol_local / 2.0, depth + 1)
        recurse(xm, x2, f1, f2, fr, s_right, tol_local / 2.0, depth + 1)

    recurse(a, b, fa, fb, fm, whole, tol, 0)
    knots_arr = np.asarray(knots)
    incs_arr = np.asarray(incs)
    return incs_arr.sum(axis=0), knots_arr, incs_arr


def _composite_simpson_cumulative(f, xs):
    """Cumulative integrals of a vector integrand at the points ``xs`` using
    Simpson's rule on each subinterval (midpoint evaluations included)."""
    vals = [np.atleast_1d(np.asarray(f(x), dtype=float)) for x in xs]
    out = [np.zeros_like(vals[0])]
    for k in range(len(xs) - 1):
        xm = 0.5 * (xs[k] + xs[k + 1])
        fm = np.atleast_1d(np.asarray(f(xm), dtype=float))
        inc = (xs[k + 1] - xs[k]) / 6.0 * (vals[k] + 4.0 * fm + vals[k + 1])
        out.append(out[-1] + inc)
    return np.asarray(out)


def ks_distance(density_a, density_b, lo: float, hi: float,
                tol: float = 1e-10, noise: float = 1e-14) -> float:
    """Kolmogorov distance between two 1-D densities on [lo, hi].

    Both densities are integrated with a shared adaptive Simpson refinement
    (absolute tolerance ``tol``), normalized by their own totals, and the sup
    of |CDF difference| is taken over the quadrature knots, sharpened by one
    local refinement pass around the argmax.
    """
    pair = lambda x: np.array([density_a(x), density_b(x)])
    totals, knots, incs = adaptive_simpson(pair, lo, hi, tol=tol, noise=noise)
    if np.any(totals <= 0):
        raise DomainError("densities must have positive mass for KS")
    cdf = np.vstack([np.zeros((1, 2)), np.cumsum(incs, axis=0)])
    diffs = np.abs(cdf[:, 0] / totals[0] - cdf[:, 1] / totals[1])
    k = int(np.argmax(diffs))
    best = float(diffs[k])

    # Local refinement: rebuild the CDFs on a dense grid between the knot's
    # neighbors and re-take the sup there.
    lo_k = knots[max(k - 1, 0)]
    hi_k = knots[min(k + 1, len(knots) - 1)]
    if hi_k > lo_k:
        xs = np.linspace(lo_k, hi_k, 65)
        local = _composite_simpson_cumulative(pair, xs)
        base = cdf[max(k - 1, 0)]
        vals = np.abs((base[0] + local[:, 0]) / totals[0]
                      - (base[1] + local[:, 1]) / totals[1])
        best = max(best, float(np.max(vals)))
    return min(best, 1.0)


def ks_empirical(sample: np.ndarray, cdf) -> float:
    """One-sample Kolmogorov statistic of a sample against a CDF callable."""
    x = np.sort(np.asarray(sample, dtype=float))
    n = x.size
    if n == 0:
        raise DomainError("empirical KS needs a nonempty sample")
    f = np.asarray(cdf(x), dtype=float)
    grid = np.arange(1, n + 1) / n
    return float(max(np.max(grid - f), np.max(f - (grid - 1.0 / n))))
