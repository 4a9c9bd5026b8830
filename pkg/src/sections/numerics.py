"""Low-level numerical helpers: finite-difference Hessians and deterministic
direction sets.

Everything here is pure and deterministic for fixed inputs.
"""

from __future__ import annotations

import numpy as np
from scipy.special import ndtri

# Fourth-order central coefficients for the first derivative, offsets -2..2
# (the 0 offset carries weight 0 and is skipped).
_D1_OFFSETS = np.array([-2.0, -1.0, 1.0, 2.0])
_D1_WEIGHTS = np.array([1.0, -8.0, 8.0, -1.0]) / 12.0

# Fourth-order central coefficients for the second derivative, offsets -2..2.
_D2_OFFSETS = np.array([-2.0, -1.0, 0.0, 1.0, 2.0])
_D2_WEIGHTS = np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / 12.0


def fd_hessian(func, x0: np.ndarray, h: float) -> np.ndarray:
    """Fourth-order finite-difference Hessian of a scalar field.

    ``func`` must accept an (N, m) array of points and return an (N,) array.
    The fourth-order stencils are exact on polynomials up to degree five,
    which keeps the truncation error near machine level for the step sizes
    used by the star-body frames and, crucially, annihilates pure quartic
    flats so that vanishing curvature shows up as a true zero eigenvalue.
    """
    x0 = np.asarray(x0, dtype=float)
    m = x0.size
    points = []
    # Diagonal entries: 1-D second-derivative stencil per coordinate.
    for i in range(m):
        for off in _D2_OFFSETS:
            p = x0.copy()
            p[i] += off * h
            points.append(p)
    # Off-diagonal entries: product of two first-derivative stencils.
    for i in range(m):
        for j in range(i + 1, m):
            for oi in _D1_OFFSETS:
                for oj in _D1_OFFSETS:
                    p = x0.copy()
                    p[i] += oi * h
                    p[j] += oj * h
                    points.append(p)
    vals = np.asarray(func(np.array(points)), dtype=float)

    H = np.empty((m, m))
    k = 0
    for i in range(m):
        H[i, i] = _D2_WEIGHTS @ vals[k:k + 5] / (h * h)
        k += 5
    for i in range(m):
        for j in range(i + 1, m):
            block = vals[k:k + 16].reshape(4, 4)
            k += 16
            H[i, j] = H[j, i] = _D1_WEIGHTS @ block @ _D1_WEIGHTS / (h * h)
    return H


def kronecker_root(m: int) -> float:
    """Positive root > 1 of x**(m+1) = x + 1 (generalized golden ratio)."""
    x = 1.5
    for _ in range(80):
        f = x ** (m + 1) - x - 1.0
        df = (m + 1) * x ** m - 1.0
        step = f / df
        x -= step
        if abs(step) < 1e-15:
            break
    return x


def sphere_directions(m: int, count: int) -> np.ndarray:
    """Deterministic low-discrepancy unit directions in R^m.

    Uses the additive Kronecker sequence driven by the generalized golden
    ratio, pushed onto the sphere through the normal quantile map. For m = 1
    the two signs are returned.
    """
    if m == 1:
        return np.array([[1.0], [-1.0]])
    phi = kronecker_root(m)
    alpha = phi ** -(np.arange(1, m + 1, dtype=float))
    k = np.arange(1, count + 1, dtype=float)[:, None]
    u = np.mod(0.5 + k * alpha[None, :], 1.0)
    z = ndtri(np.clip(u, 1e-12, 1.0 - 1e-12))
    norms = np.linalg.norm(z, axis=1)
    # A row of near-zeros cannot occur for the shifted sequence, but guard it.
    bad = norms < 1e-9
    if np.any(bad):
        z[bad] = 0.0
        z[bad, 0] = 1.0
        norms[bad] = 1.0
    return z / norms[:, None]


def complement_basis(v: np.ndarray, drop_index: int | None = None) -> np.ndarray:
    """Deterministic (n, n-1) basis of the orthogonal complement of ``v``.

    Columns are e_j - v_j * v / ||v||^2 for every j except ``drop_index``
    (defaults to the coordinate of largest |v_j|, which keeps the basis well
    conditioned).
    """
    v = np.asarray(v, dtype=float)
    n = v.size
    if drop_index is None:
        drop_index = int(np.argmax(np.abs(v)))
    vv = v / np.dot(v, v)
    cols = []
    for j in range(n):
        if j == drop_index:
            continue
        e = np.zeros(n)
        e[j] = 1.0
        cols.append(e - v[j] * vv)
    return np.column_stack(cols)


def orthonormal_columns(basis: np.ndarray) -> np.ndarray:
    """QR-orthonormalization with a deterministic sign convention."""
    q, r = np.linalg.qr(basis)
    signs = np.sign(np.diag(r))
    signs[signs == 0] = 1.0
    return q * signs[None, :]
