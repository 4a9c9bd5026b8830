"""Sections of log-concave product densities.

Given f(x) = exp(-sum g_i(x_i)) and a hyperplane {<x, theta> = T} far from
the origin, the section of f is approximately Gaussian once it is recentered
at its apex and whitened by the apex curvatures. This module finds the apex
by a Lagrange-multiplier solve, builds the whitening embedding Q and the
normalizer alpha, and measures the deviation from the standard normal
against the curvature-modulus bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .comparison import (GaussComparison, ShellGrid, std_normal_logpdf,
                         sup_metrics, ks_distance, LOG_2PI)
from .errors import (DegenerateCurvatureError, DomainError,
                     NonConvergenceError, RangeError)
from .numerics import complement_basis, orthonormal_columns
from .profiles import ConvexProfile, modulus_xi

_OUTER_BISECTIONS = 100
_INNER_TOL_STEPS = 200
_BRACKET_CAP = 200


@dataclass(frozen=True)
class Direction:
    """A unit direction with no zero coordinate.

    The constructor normalizes the input vector; q caches min_i |theta_i|,
    which must be positive for the section theorems to apply.
    """
    theta: np.ndarray
    q: float = field(init=False)

    def __post_init__(self):
        theta = np.asarray(self.theta, dtype=float)
        norm = float(np.linalg.norm(theta))
        if norm == 0.0:
            raise DomainError("direction must be a nonzero vector")
        theta = theta / norm
        object.__setattr__(self, "theta", theta)
        q = float(np.min(np.abs(theta)))
        if q <= 0.0:
            raise DomainError("direction must have no zero coordinate")
        object.__setattr__(self, "q", q)

    @property
    def n(self) -> int:
        return self.theta.size


@dataclass(frozen=True)
class ProductDensity:
    """f(x) = exp(-sum g_i(x_i)) on R^n, n >= 2."""
    profiles: tuple

    def __post_init__(self):
        object.__setattr__(self, "profiles", tuple(self.profiles))
        if len(self.profiles) < 2:
            raise DomainError("product densities need dimension n >= 2")

    @property
    def n(self) -> int:
        return len(self.profiles)

    def log_f(self, x: np.ndarray) -> np.ndarray:
        """log f at the rows of an (N, n) array."""
        x = np.asarray(x, dtype=float)
        total = np.zeros(x.shape[0])
        for i, prof in enumerate(self.profiles):
            total += np.asarray(prof.d(0)(x[:, i]), dtype=float)
        return -total


@dataclass(frozen=True)
class SectionFrame:
    """Affine frame of a product-density section.

    x -> Q x + y maps the whitened coordinates into the hyperplane
    {<x, theta> = T}; alpha (stored as log_alpha, the raw value overflows
    quickly) normalizes the section to unit height against phi_{n-1}.
    y_min is the smallest apex coordinate in the sign-normalized frame and
    feeds the modulus bound.
    """
    theta: np.ndarray
    y: np.ndarray
    lam: float
    Q: np.ndarray
    log_alpha: float
    T: float
    y_min: float

    @property
    def n(self) -> int:
        return self.y.size


def _invert_gprime(profile: ConvexProfile, targets: np.ndarray) -> np.ndarray:
    """Vectorized inversion of the strictly increasing g' at each target.

    Brackets by doubling, bisects to machine width, then polishes with a few
    Newton steps. RangeError if a target cannot be bracketed within floats.
    """
    g1 = profile.d(1)
    g2 = profile.d(2)
    v = np.asarray(targets, dtype=float)
    lo = np.zeros_like(v)
    hi = np.zeros_like(v)
    f0 = np.asarray(g1(np.zeros_like(v)), dtype=float)

    up = v >= f0
    lo[up] = 0.0
    hi[up] = 1.0
    lo[~up] = -1.0
    hi[~up] = 0.0
    for _ in range(_BRACKET_CAP):
        with np.errstate(all="ignore"):
            need_up = up & (np.asarray(g1(hi), dtype=float) < v)
            need_dn = (~up) & (np.asarray(g1(lo), dtype=float) > v)
        if not (np.any(need_up) or np.any(need_dn)):
            break
        lo[need_up] = hi[need_up]
        hi[need_up] *= 2.0
        hi[need_dn] = lo[need_dn]
        lo[need_dn] *= 2.0
        if np.any(np.abs(hi) > 1e300) or np.any(np.abs(lo) > 1e300):
            raise RangeError(
                f"target {float(v[np.argmax(np.abs(hi))]):g} is outside the "
                f"range of g' for profile {profile.tag}")
    else:
        raise RangeError(f"could not bracket g' inversion for {profile.tag}")

    for _ in range(_INNER_TOL_STEPS):
        mid = 0.5 * (lo + hi)
        gm = np.asarray(g1(mid), dtype=float)
        high = gm > v
        hi = np.where(high, mid, hi)
        lo = np.where(high, lo, mid)
        if np.all(hi - lo <= 1e-16 * (1.0 + np.abs(lo) + np.abs(hi))):
            break
    y = 0.5 * (lo + hi)
    for _ in range(3):
        with np.errstate(all="ignore"):
            step = (np.asarray(g1(y), dtype=float) - v) \
                / np.asarray(g2(y), dtype=float)
        step = np.where(np.isfinite(step), step, 0.0)
        y_new = y - step
        inside = (y_new >= lo) & (y_new <= hi)
        y = np.where(inside, y_new, y)
    return y


def solve_lagrange(density: ProductDensity, direction: Direction, T: float):
    """Minimize sum g_i on the hyperplane {<x, theta> = T}.

    Returns (y, lam) with grad g(y) = lam * theta. Coordinates with negative
    theta_i are reflected (g_i(t) -> g_i(-t)) so the solve runs with all
    positive components, then mapped back; the solve itself is a monotone
    outer root-find in lam with nested inversion of each g_i'.
    """
    if density.n != direction.n:
        raise DomainError("density and direction dimensions disagree")
    if not T > 0:
        raise DomainError("the section offset T must be positive")

    theta = direction.theta
    flip = theta < 0
    th = np.abs(theta)
    profs = [p.reflected() if f else p
             for p, f in zip(density.profiles, flip)]

    # Group coordinates sharing a profile object so each inversion runs once,
    # vectorized over its coordinates.
    groups: dict = {}
    for i, (orig, prof) in enumerate(zip(density.profiles, profs)):
        key = (id(orig), bool(flip[i]))
        groups.setdefault(key, (prof, []))[1].append(i)

    def residual(lam: float):
        ys = np.empty(density.n)
        for prof, idx in groups.values():
            ys[idx] = _invert_gprime(prof, lam * th[idx])
        return float(np.dot(th, ys) - T), ys

    lam0 = max(float(prof.d(1)(T)) / th[i] for i, prof in enumerate(profs))
    r0, _ = residual(lam0)
    if r0 == 0.0:
        lam_lo = lam_hi = lam0
    else:
        sign = 1.0 if r0 < 0.0 else -1.0   # residual is increasing in lam
        step = max(1.0, 0.5 * abs(lam0))
        prev = lam0
        lam_lo = lam_hi = lam0
        for _ in range(_BRACKET_CAP):
            cand = prev + sign * step
            try:
                r, _ = residual(cand)
            except RangeError:
                step *= 0.5
                if step < 1e-12 * (1.0 + abs(prev)):
                    raise
                continue
            if (r >= 0.0) != (r0 >= 0.0):
                lam_lo, lam_hi = (prev, cand) if sign > 0 else (cand, prev)
                break
            prev = cand
            step *= 2.0
        else:
            raise NonConvergenceError("could not bracket the multiplier")

    # Bisect on the residual value: near a curvature-degenerate apex the
    # residual is root-flat in lam and interval width alone says nothing
    # about constraint accuracy, so iterate until the residual itself is
    # small (well-conditioned problems exit in far fewer steps).
    lo, hi = lam_lo, lam_hi
    r_tol = 1e-11 * max(1.0, T)
    lam = 0.5 * (lo + hi)
    for _ in range(4 * _OUTER_BISECTIONS):
        lam = 0.5 * (lo + hi)
        r, _ = residual(lam)
        if abs(r) <= r_tol:
            break
        if r > 0.0:
            hi = lam
        else:
            lo = lam

    # Newton polish on the outer equation; h'(lam) = sum theta_i^2 / g_i''.
    for _ in range(4):
        r, ys = residual(lam)
        slope = 0.0
        for i, prof in enumerate(profs):
            slope += th[i] ** 2 / float(prof.d(2)(ys[i]))
        if slope <= 0 or not np.isfinite(slope):
            break
        lam_new = lam - r / slope
        if not np.isfinite(lam_new):
            break
        lam = lam_new
    _, ys = residual(lam)

    resid = np.abs(np.array([float(profs[i].d(1)(ys[i])) for i in range(density.n)])
                   - lam * th)
    if np.any(resid > 1e-8 * (1.0 + abs(lam))):
        raise NonConvergenceError(
            f"stationarity residual {float(resid.max()):.3e} exceeds tolerance")
    if abs(float(np.dot(th, ys)) - T) > 1e-10 * max(1.0, T):
        raise NonConvergenceError("constraint residual exceeds tolerance")

    y = np.where(flip, -ys, ys)
    return y, float(lam)


def build_frame(density: ProductDensity, direction: Direction, T: float,
                basis_index: int | None = None) -> SectionFrame:
    """Construct the section frame at offset T.

    Q comes from orthonormalizing a fixed basis of theta-perp under the
    curvature-weighted inner product <u, v> = sum u_i v_i g_i''(y_i), so
    that Q^T diag(g'') Q = I; log alpha = sum g_i(y_i) - (n-1)/2 log(2 pi).
    ``basis_index`` selects which coordinate the complement basis drops
    (exposed for the basis-independence checks).
    """
    y, lam = solve_lagrange(density, direction, T)
    theta = direction.theta
    curv = np.array([float(p.d(2)(yi))
                     for p, yi in zip(density.profiles, y)])
    if np.any(curv <= 1e-14):
        i = int(np.argmin(curv))
        raise DegenerateCurvatureError(
            f"g''(y_{i}) = {curv[i]:.3e} is numerically zero at the apex")

    basis = complement_basis(theta, drop_index=basis_index)
    sqrt_d = np.sqrt(curv)
    q_tilde = orthonormal_columns(sqrt_d[:, None] * basis)
    Q = q_tilde / sqrt_d[:, None]

    log_alpha = float(sum(float(p.d(0)(yi))
                          for p, yi in zip(density.profiles, y)))
    log_alpha -= 0.5 * (density.n - 1) * LOG_2PI

    y_norm = np.where(theta < 0, -y, y)   # sign-normalized apex
    return SectionFrame(theta=theta, y=y, lam=lam, Q=Q,
                        log_alpha=log_alpha, T=float(T),
                        y_min=float(np.min(y_norm)))


def section_error(density: ProductDensity, frame: SectionFrame, r: float,
                  grid: ShellGrid | None = None,
                  ks: bool | None = None) -> GaussComparison:
    """Measure the deviation of the normalized section from phi_{n-1}.

    Evaluates sup over grid points ||x|| <= r of |alpha f(Qx + y) / phi(x) - 1|
    (and the absolute counterpart) in log arithmetic, and attaches the bound
    surrogate B = n r^3 xi(r, y_min) together with its validity flag B <= 6.
    The Kolmogorov distance is included for one-dimensional sections unless
    ``ks`` is False.
    """
    if not r > 0:
        raise DomainError("the comparison radius r must be positive")
    m = frame.n - 1
    if grid is None:
        grid = ShellGrid(r=r)
    elif grid.r != r:
        grid = ShellGrid(r=r, shells=grid.shells, directions=grid.directions)

    pts = grid.points(m)
    z = pts @ frame.Q.T + frame.y[None, :]
    logd = frame.log_alpha + density.log_f(z)
    logphi = std_normal_logpdf(pts)
    sup_abs, sup_rel = sup_metrics(logd, logphi)

    ks_val = None
    if m == 1 and (ks is None or ks):
        col = frame.Q[:, 0]

        def d_section(s):
            zz = frame.y + s * col
            return math.exp(frame.log_alpha
                            + float(density.log_f(zz[None, :])[0]))

        d_ref = lambda s: math.exp(-0.5 * s * s - 0.5 * LOG_2PI)
        noise = 64.0 * np.finfo(float).eps * (1.0 + abs(frame.log_alpha))
        ks_val = ks_distance(d_section, d_ref, -12.0, 12.0, tol=1e-10,
                             noise=noise)

    if frame.y_min > 0:
        seen = {}
        xi = 0.0
        for prof in density.profiles:
            key = id(prof)
            if key not in seen:
                seen[key] = modulus_xi(prof, r, frame.y_min)
            xi = max(xi, seen[key])
        bound = density.n * r ** 3 * xi
    else:
        bound = math.inf
    return GaussComparison(sup_abs=sup_abs, sup_rel=sup_rel, ks_1d=ks_val,
                           bound_surrogate=bound, bound_valid=bool(bound <= 6.0),
                           n_points=pts.shape[0], max_spacing=grid.max_spacing)


def frame_to_dict(frame: SectionFrame) -> dict:
    """Serialize a frame with explicit row-major matrix layout."""
    n, m = frame.Q.shape
    return {
        "theta": [float(v) for v in frame.theta],
        "y": [float(v) for v in frame.y],
        "lambda": float(frame.lam),
        "Q": {"rows": n, "cols": m,
              "data": [float(v) for v in frame.Q.ravel(order="C")]},
        "log_alpha": float(frame.log_alpha),
        "T": float(frame.T),
        "y_min": float(frame.y_min),
    }


def frame_from_dict(payload: dict) -> SectionFrame:
    """Rebuild a frame previously produced by ``frame_to_dict``."""
    q = payload["Q"]
    Q = np.asarray(q["data"], dtype=float).reshape(q["rows"], q["cols"])
    return SectionFrame(
        theta=np.asarray(payload["theta"], dtype=float),
        y=np.asarray(payload["y"], dtype=float),
        lam=float(payload["lambda"]),
        Q=Q,
        log_alpha=float(payload["log_alpha"]),
        T=float(payload["T"]),
        y_min=float(payload["y_min"]),
    )
