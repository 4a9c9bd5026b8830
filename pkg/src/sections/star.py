"""Sections of star-shaped densities f(x) = exp(-rho(||x||_K)).

At a boundary point theta of the star body K with non-degenerate apex
Hessian, the body locally looks like an ellipsoid; whitening that ellipsoid
turns the far-out sections of f through t*theta into standard Gaussians.
The module ships a catalog of Minkowski functionals (Euclidean, l_p, Orlicz,
Lorentz), the apex-frame construction, per-offset normalizers, convergence
sweeps in t, and a cross-check of the product and star pipelines on the
densities exp(-||x||_p^p) that both cover.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .comparison import (BoxGrid, GaussComparison, LOG_2PI,
                         std_normal_logpdf, sup_metrics)
from .errors import (CurvatureError, DomainError, NotTouchingError)
from .numerics import (complement_basis, fd_hessian, orthonormal_columns)
from .product import Direction, ProductDensity, build_frame, frame_to_dict
from .profiles import ConvexProfile, RadialProfile

_GAUGE_REL_TOL = 1e-12
_EIGENVALUE_FLOOR = 1e-8
_TOUCH_PROBES = 1000


class OrliczFunction:
    """A convex function phi with phi(0) = 0, phi > 0 elsewhere, plus its
    derivative (needed for analytic gauge gradients)."""

    def __init__(self, value, deriv, tag="custom"):
        self.value = value
        self.deriv = deriv
        self.tag = tag

    @classmethod
    def exp(cls):
        return cls(lambda t: np.expm1(t), lambda t: np.exp(t), "exp")

    @classmethod
    def power(cls, p: float):
        p = float(p)
        if not p > 1:
            raise DomainError(f"Orlicz power needs p > 1, got {p}")
        return cls(lambda t: np.asarray(t, dtype=float) ** p,
                   lambda t: p * np.asarray(t, dtype=float) ** (p - 1.0),
                   f"power:{p:g}")


class StarBody:
    """A star body through its Minkowski functional.

    ``gauge`` evaluates ||x||_K on the rows of an (N, n) array; ``gradient``
    returns the gauge gradient at a single point (used to build the default
    touching functional). Construct through the factory classmethods.
    """

    def __init__(self, n, tag, gauge, gradient=None, validate=False):
        self.n = int(n)
        self.tag = tag
        self._gauge = gauge
        self._gradient = gradient
        if validate:
            self._validate()

    def __repr__(self):
        return f"StarBody({self.tag!r}, n={self.n})"

    def _validate(self):
        rng = np.random.Generator(np.random.Philox(20335))
        x = rng.standard_normal((32, self.n))
        s = rng.uniform(0.2, 5.0, size=32)
        g = self.gauge(x)
        gs = self.gauge(x * s[:, None])
        if np.any(np.abs(gs - s * g) > 1e-10 * np.abs(s * g)):
            raise DomainError(f"gauge of {self.tag} is not 1-homogeneous")
        on_boundary = self.gauge(x / g[:, None])
        if np.any(np.abs(on_boundary - 1.0) > 1e-10):
            raise DomainError(f"gauge of {self.tag} fails boundary renormalization")

    def gauge(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if x.shape[1] != self.n:
            raise DomainError(f"points have dimension {x.shape[1]}, body has {self.n}")
        if np.any(np.all(x == 0.0, axis=1)):
            raise DomainError("the Minkowski functional is undefined at 0")
        return self._gauge(x)

    def gauge_one(self, x) -> float:
        return float(self.gauge(np.asarray(x, dtype=float)[None, :])[0])

    def boundary_point(self, v) -> np.ndarray:
        """Radial projection of v onto the boundary of K."""
        v = np.asarray(v, dtype=float)
        return v / self.gauge_one(v)

    def gradient(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self._gradient is not None:
            return np.asarray(self._gradient(x), dtype=float)
        # Finite-difference fallback for custom bodies without a gradient.
        h = 1e-6 * (1.0 + float(np.linalg.norm(x)))
        grad = np.empty(self.n)
        for i in range(self.n):
            e = np.zeros(self.n)
            e[i] = h
            grad[i] = (self.gauge_one(x + e) - self.gauge_one(x - e)) / (2 * h)
        return grad

    def log_density(self, rho: RadialProfile, x: np.ndarray) -> np.ndarray:
        """log of exp(-rho(||x||_K)) on the rows of x."""
        return -np.asarray(rho.d(0)(self.gauge(x)), dtype=float)

    # ------------------------------------------------------------------
    # Catalog
    # ------------------------------------------------------------------

    @classmethod
    def euclidean(cls, n: int) -> "StarBody":
        return cls(n, "euclidean",
                   lambda x: np.linalg.norm(x, axis=1),
                   lambda x: x / np.linalg.norm(x))

    @classmethod
    def lp(cls, n: int, p: float) -> "StarBody":
        p = float(p)
        if not p >= 1:
            raise DomainError(f"lp body needs p >= 1, got {p}")

        def gauge(x):
            return np.sum(np.abs(x) ** p, axis=1) ** (1.0 / p)

        def gradient(x):
            g = np.sum(np.abs(x) ** p) ** (1.0 / p)
            return np.sign(x) * np.abs(x) ** (p - 1.0) * g ** (1.0 - p)

        return cls(n, f"lp:{p:g}", gauge, gradient)

    @classmethod
    def orlicz(cls, n: int, phi: OrliczFunction) -> "StarBody":
        """{x : sum phi(|x_i|) <= 1}; the gauge solves
        sum phi(|x_i| / lam) = 1 by bracketing and bisection."""

        def gauge(x):
            ax = np.abs(x)
            return _homogeneous_root(
                lambda lam: np.sum(phi.value(ax / lam[:, None]), axis=1), ax)

        def gradient(x):
            lam = float(gauge(np.asarray(x, dtype=float)[None, :])[0])
            u = np.abs(x) / lam
            w = np.asarray(phi.deriv(u), dtype=float)
            denom = float(np.dot(w, np.abs(x)))
            return np.sign(x) * w * lam / denom

        return cls(n, f"orlicz:{phi.tag}", gauge, gradient)

    @classmethod
    def lorentz(cls, n: int, weights, p: float) -> "StarBody":
        """{x : sum w_i |x|_(i)^p <= 1} with |x|_(i) the non-decreasing
        rearrangement of |x| and non-decreasing positive weights."""
        w = np.asarray(weights, dtype=float)
        p = float(p)
        if w.size != n:
            raise DomainError(f"need {n} Lorentz weights, got {w.size}")
        if np.any(w <= 0) or np.any(np.diff(w) < 0):
            raise DomainError("Lorentz weights must be positive and non-decreasing")
        if not p >= 1:
            raise DomainError(f"Lorentz body needs p >= 1, got {p}")

        def gauge(x):
            ax = np.sort(np.abs(x), axis=1)
            return _homogeneous_root(
                lambda lam: np.sum(w[None, :] * (ax / lam[:, None]) ** p, axis=1),
                ax)

        def gradient(x):
            ax = np.abs(x)
            order = np.argsort(ax, kind="stable")
            rank = np.empty(x.size, dtype=int)
            rank[order] = np.arange(x.size)
            lam = float(gauge(np.asarray(x, dtype=float)[None, :])[0])
            return np.sign(x) * w[rank] * ax ** (p - 1.0) * lam ** (1.0 - p)

        return cls(n, f"lorentz:p={p:g}", gauge, gradient)

    @classmethod
    def custom(cls, n: int, gauge, gradient=None, tag="custom") -> "StarBody":
        """Register a custom gauge (vectorized over rows); homogeneity and
        boundary renormalization are verified at registration."""
        return cls(n, tag, gauge, gradient, validate=True)


def _homogeneous_root(level, ax: np.ndarray) -> np.ndarray:
    """Solve level(lam) = 1 per row by bisection to relative 1e-12.

    ``level`` must be strictly decreasing in lam (true for gauges of the
    Orlicz/Lorentz form); ``ax`` are the |x| rows used for bracketing scale.
    """
    scale = np.maximum(np.max(ax, axis=1), 1e-300)
    lo = scale.copy()
    hi = scale.copy()
    with np.errstate(all="ignore"):
        for _ in range(200):
            too_small = level(lo) < 1.0          # lam too large -> shrink lo
            if not np.any(too_small):
                break
            lo[too_small] *= 0.5
        for _ in range(200):
            too_big = level(hi) > 1.0
            if not np.any(too_big):
                break
            hi[too_big] *= 2.0
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            above = level(mid) > 1.0
            lo = np.where(above, mid, lo)
            hi = np.where(above, hi, mid)
            if np.all(hi - lo <= _GAUGE_REL_TOL * hi):
                break
    return 0.5 * (lo + hi)


def minkowski_eval(body: StarBody, x) -> float:
    """||x||_K for a single point; DomainError at x = 0."""
    return body.gauge_one(x)


# ---------------------------------------------------------------------------
# Apex frames
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class StarFrame:
    """Local ellipsoid frame at a boundary apex theta.

    Q spans null(phi); H is the apex Hessian of x -> ||Qx + theta||_K at 0;
    Lambda = sqrt(2) H^(-1/2) whitens it so that the gauge along
    T_map = Q Lambda expands as 1 + ||x||^2 + o(||x||^2).
    """
    body: StarBody
    theta: np.ndarray
    phi: np.ndarray
    Q: np.ndarray
    H: np.ndarray
    Lambda: np.ndarray
    T_map: np.ndarray

    @property
    def n(self) -> int:
        return self.theta.size

    def log_alpha(self, rho: RadialProfile, t: float) -> float:
        return float(rho.d(0)(float(t))) - 0.5 * (self.n - 1) * LOG_2PI

    def beta(self, rho: RadialProfile, t: float) -> float:
        rp = float(rho.d(1)(float(t)))
        if rp <= 0:
            raise DomainError(f"rho'({t}) = {rp:g} must be positive")
        return math.sqrt(t / (2.0 * rp))


def apex_frame(body: StarBody, theta, phi=None,
               basis_index: int | None = None) -> StarFrame:
    """Build the local ellipsoid frame of K at the boundary point theta.

    ``phi`` is the touching functional (a vector acting by inner product);
    when omitted it defaults to the gauge gradient at theta. The functional
    is probed for a strict maximum at theta over seeded boundary points; the
    apex Hessian is taken by fourth-order finite differences at two step
    sizes, which both sharpens it (Richardson) and exposes non-smooth gauges
    through step instability.
    """
    theta = np.asarray(theta, dtype=float)
    g = body.gauge_one(theta)
    if abs(g - 1.0) > 1e-8:
        raise DomainError(f"apex must lie on the boundary; gauge = {g!r}")
    if phi is None:
        phi = body.gradient(theta)
    phi = np.asarray(phi, dtype=float)
    if float(np.linalg.norm(phi)) == 0.0:
        raise DomainError("touching functional must be nonzero")

    _probe_touching(body, theta, phi)

    Q = orthonormal_columns(complement_basis(phi, drop_index=basis_index))
    m = body.n - 1

    def q_of(x):
        return body.gauge(x @ Q.T + theta[None, :])

    h = (np.finfo(float).eps ** (1.0 / 6.0)) * (1.0 + float(np.linalg.norm(theta)))
    H_coarse = fd_hessian(q_of, np.zeros(m), h)
    H_fine = fd_hessian(q_of, np.zeros(m), 0.5 * h)
    drift = float(np.max(np.abs(H_coarse - H_fine)))
    if drift > 1e-4 * (1.0 + float(np.max(np.abs(H_coarse)))):
        raise CurvatureError(
            f"apex Hessian of {body.tag} is unstable under step refinement "
            f"(drift {drift:.3e}); the gauge is non-smooth or degenerate at "
            f"the apex")
    H = (16.0 * H_fine - H_coarse) / 15.0
    H = 0.5 * (H + H.T)

    eigval, eigvec = np.linalg.eigh(H)
    if np.any(eigval <= _EIGENVALUE_FLOOR):
        raise CurvatureError(
            f"apex Hessian eigenvalue {float(eigval.min()):.3e} vanishes: "
            f"no curvature at this boundary point of {body.tag}")
    Lam = math.sqrt(2.0) * (eigvec * (1.0 / np.sqrt(eigval))[None, :]) @ eigvec.T
    return StarFrame(body=body, theta=theta, phi=phi, Q=Q, H=H,
                     Lambda=Lam, T_map=Q @ Lam)


def _probe_touching(body: StarBody, theta: np.ndarray, phi: np.ndarray):
    rng = np.random.Generator(np.random.Philox(70911))
    z = rng.standard_normal((_TOUCH_PROBES, body.n))
    g = body.gauge(z)
    pts = z / g[:, None]
    target = float(np.dot(phi, theta))
    vals = pts @ phi
    near = np.linalg.norm(pts - theta[None, :], axis=1) <= 1e-6
    bad = (~near) & (vals >= target - 1e-12 * abs(target))
    if np.any(bad):
        k = int(np.argmax(np.where(bad, vals, -np.inf)))
        raise NotTouchingError(
            f"functional is not strictly maximized at the apex: probe point "
            f"attains {float(vals[k]):.12g} vs {target:.12g}")


def star_frame_at(frame: StarFrame, rho: RadialProfile, t: float):
    """The offset-t normalization: (log alpha(t), beta(t), affine map).

    The map sends whitened coordinates x to beta(t) * T_map x + t theta.
    """
    if not t > 0:
        raise DomainError("the offset t must be positive")
    log_alpha = frame.log_alpha(rho, t)
    beta = frame.beta(rho, t)
    A = beta * frame.T_map
    base = t * frame.theta

    def affine(x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return x @ A.T + base[None, :]

    return log_alpha, beta, affine


def star_convergence_sweep(body: StarBody, rho: RadialProfile,
                           frame: StarFrame, omega: BoxGrid,
                           t_grid) -> list[GaussComparison]:
    """Error curve of sup over the Omega grid of
    |alpha(t) f(beta(t) T x + t theta) - phi_{n-1}(x)| along increasing t."""
    m = body.n - 1
    pts = omega.points(m)
    logphi = std_normal_logpdf(pts)
    out = []
    for t in sorted(float(t) for t in t_grid):
        log_alpha, _, affine = star_frame_at(frame, rho, t)
        logd = log_alpha + body.log_density(rho, affine(pts))
        sup_abs, sup_rel = sup_metrics(logd, logphi)
        out.append(GaussComparison(sup_abs=sup_abs, sup_rel=sup_rel,
                                   n_points=pts.shape[0],
                                   max_spacing=omega.max_spacing))
    return out


# ---------------------------------------------------------------------------
# Cross-validation of the two pipelines on exp(-||x||_p^p)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CrossValidationReport:
    """Agreement report between the product and star descriptions of the
    same section hyperplane of exp(-||x||_p^p)."""
    T: float
    t_star: float
    product_error: float
    star_error: float
    transition: np.ndarray
    mtm_deviation: float
    base_point_gap: float

    def to_dict(self) -> dict:
        m = self.transition
        return {
            "T": self.T, "t_star": self.t_star,
            "product_error": self.product_error,
            "star_error": self.star_error,
            "transition": {"rows": m.shape[0], "cols": m.shape[1],
                           "data": [float(v) for v in m.ravel(order="C")]},
            "mtm_deviation": self.mtm_deviation,
            "base_point_gap": self.base_point_gap,
        }


def cross_validate_lp(p: float, n: int, direction: Direction, T: float,
                      omega: BoxGrid | None = None) -> CrossValidationReport:
    """Run both pipelines on f(x) = exp(-||x||_p^p) over one hyperplane.

    The direction must have equal positive coordinates (the diagonal, where
    the product apex and the star apex ray coincide). The star offset is
    t = T n^(1/p - 1/2), which places t * theta_K on the product hyperplane
    {<x, theta> = T}; the transition matrix M solves Q_prod M = beta T_map
    and converges to an orthogonal matrix as both errors vanish.
    """
    theta = direction.theta
    if np.any(theta <= 0) or np.ptp(theta) > 1e-12:
        raise DomainError("cross-validation requires the positive diagonal direction")
    if omega is None:
        omega = BoxGrid(halfwidth=2.0, points_per_axis=21)

    profiles = tuple(ConvexProfile.power(p) for _ in range(n))
    density = ProductDensity(profiles)
    pframe = build_frame(density, direction, T)

    body = StarBody.lp(n, p)
    theta_k = body.boundary_point(np.ones(n))
    sframe = apex_frame(body, theta_k)
    rho = RadialProfile.power(p)
    t_star = T * n ** (1.0 / p - 0.5)
    log_alpha_s, beta, affine = star_frame_at(sframe, rho, t_star)

    base_gap = float(np.linalg.norm(pframe.y - t_star * theta_k))

    A = beta * sframe.T_map
    M, *_ = np.linalg.lstsq(pframe.Q, A, rcond=None)
    mtm_dev = float(np.max(np.abs(M.T @ M - np.eye(n - 1))))

    m = n - 1
    pts = omega.points(m)
    logphi = std_normal_logpdf(pts)

    star_logd = log_alpha_s + body.log_density(rho, affine(pts))
    star_err = float(sup_metrics(star_logd, logphi)[0])

    u = pts @ M.T
    z = u @ pframe.Q.T + pframe.y[None, :]
    prod_logd = pframe.log_alpha + density.log_f(z)
    prod_err = float(np.max(np.abs(np.expm1(prod_logd - std_normal_logpdf(u)))))

    return CrossValidationReport(T=float(T), t_star=float(t_star),
                                 product_error=prod_err, star_error=star_err,
                                 transition=M, mtm_deviation=mtm_dev,
                                 base_point_gap=base_gap)


# ---------------------------------------------------------------------------
# Spec-string parsing (shared by the CLI)
# ---------------------------------------------------------------------------

def parse_body_spec(spec: str, n: int) -> StarBody:
    """Parse "euclidean", "lp:4", "orlicz:exp", "orlicz:power:3" or
    "lorentz:p=4:w=1,2,3" into a star body of dimension n."""
    parts = spec.strip().split(":")
    if parts[0] == "euclidean" and len(parts) == 1:
        return StarBody.euclidean(n)
    if parts[0] == "lp" and len(parts) == 2:
        return StarBody.lp(n, float(parts[1]))
    if parts[0] == "orlicz" and len(parts) >= 2:
        if parts[1] == "exp" and len(parts) == 2:
            return StarBody.orlicz(n, OrliczFunction.exp())
        if parts[1] == "power" and len(parts) == 3:
            return StarBody.orlicz(n, OrliczFunction.power(float(parts[2])))
    if parts[0] == "lorentz" and len(parts) == 3:
        kv = {}
        for part in parts[1:]:
            key, _, val = part.partition("=")
            kv[key] = val
        if set(kv) == {"p", "w"}:
            weights = [float(v) for v in kv["w"].split(",")]
            return StarBody.lorentz(n, weights, float(kv["p"]))
    raise DomainError(f"unknown body spec {spec!r}")
