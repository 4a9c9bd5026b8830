import math

import numpy as np
import pytest
from scipy.special import ndtr

from sections import (BoxGrid, DomainError, GaussComparison, QuadratureFailure,
                      ShellGrid, adaptive_simpson, gauss_compare, ks_distance,
                      ks_empirical)
from sections.comparison import std_normal_logpdf


def norm_pdf(x, mu=0.0, sig=1.0):
    return math.exp(-0.5 * ((x - mu) / sig) ** 2) / (sig * math.sqrt(2 * math.pi))


def test_reflexive_comparison_is_zero():
    cmp_ = gauss_compare(std_normal_logpdf, 2, BoxGrid(3.0, 21))
    assert cmp_.sup_abs == 0.0
    assert cmp_.sup_rel == 0.0


def test_ks_shifted_normal_closed_form():
    # sup_x |Phi(x - 1/2) - Phi(x)| is attained at x = 1/4.
    ks = ks_distance(lambda x: norm_pdf(x, mu=0.5), norm_pdf, -12.0, 12.5)
    assert ks == pytest.approx(2.0 * ndtr(0.25) - 1.0, abs=1e-6)
    assert ks == pytest.approx(0.19741, abs=1e-5)


def test_gaussian_product_section_all_metrics_tiny():
    from sections import ConvexProfile, Direction, ProductDensity, \
        build_frame, section_error
    dens = ProductDensity((ConvexProfile.gaussian(),) * 2)
    fr = build_frame(dens, Direction(np.array([1.0, 1.0])), 6.0)
    cmp_ = section_error(dens, fr, 3.0)
    assert cmp_.sup_abs <= 1e-12
    assert cmp_.sup_rel <= 1e-12
    assert cmp_.ks_1d <= 1e-12


def test_ks_affine_invariance():
    base = ks_distance(lambda x: norm_pdf(x, 0.4, 1.0), norm_pdf, -12.0, 12.0)
    scaled = ks_distance(lambda x: 0.5 * norm_pdf(0.5 * x, 0.4, 1.0),
                         lambda x: 0.5 * norm_pdf(0.5 * x), -24.0, 24.0)
    assert scaled == pytest.approx(base, abs=1e-10)


def test_sup_metrics_monotone_under_refinement():
    logd = lambda pts: std_normal_logpdf(pts - 0.13)
    coarse = gauss_compare(logd, 2, BoxGrid(2.0, 21))
    fine = gauss_compare(logd, 2, BoxGrid(2.0, 41))
    assert fine.sup_abs >= coarse.sup_abs - 1e-12
    assert fine.sup_rel >= coarse.sup_rel - 1e-12
    assert fine.max_spacing == pytest.approx(coarse.max_spacing / 2.0)


def test_quadrature_normalization():
    total, _, _ = adaptive_simpson(lambda x: np.array([norm_pdf(x)]),
                                   -12.0, 12.0, tol=1e-13)
    assert float(total[0]) == pytest.approx(1.0, abs=1e-12)


def test_quadrature_failure_on_discontinuity():
    step = lambda x: np.array([1.0 if x < math.pi / 7.0 else 0.0])
    with pytest.raises(QuadratureFailure):
        adaptive_simpson(step, 0.0, 1.0, tol=1e-12, noise=0.0)


def test_adaptive_simpson_polynomial_exact():
    # Simpson integrates cubics exactly; a quintic needs refinement.
    val, knots, incs = adaptive_simpson(
        lambda x: np.array([x ** 5 - 2.0 * x + 1.0]), 0.0, 2.0, tol=1e-12)
    assert float(val[0]) == pytest.approx(2.0 ** 6 / 6.0 - 4.0 + 2.0, abs=1e-11)
    assert knots[0] == 0.0 and knots[-1] == 2.0
    assert incs.shape[0] == knots.size - 1


def test_ks_empirical_against_uniform_cdf():
    rng = np.random.Generator(np.random.Philox(3))
    sample = rng.random(2000)
    ks = ks_empirical(sample, lambda x: np.clip(x, 0.0, 1.0))
    assert ks <= 1.63 / math.sqrt(2000.0)   # 1% critical value
    with pytest.raises(DomainError):
        ks_empirical(np.array([]), lambda x: x)


def test_shell_grid_deterministic_and_bounded():
    g = ShellGrid(r=2.0, shells=5, directions=40)
    p1 = g.points(3)
    p2 = g.points(3)
    assert np.array_equal(p1, p2)
    assert p1.shape == (1 + 5 * 40, 3)
    assert np.max(np.linalg.norm(p1, axis=1)) <= 2.0 + 1e-12
    norms = np.linalg.norm(ShellGrid(r=1.0, shells=1, directions=64).points(4),
                           axis=1)
    assert np.allclose(norms[1:], 1.0, atol=1e-12)


def test_box_grid_axes_and_validation():
    g = BoxGrid(halfwidth=[1.0, 2.0], points_per_axis=5)
    pts = g.points(2)
    assert pts.shape == (25, 2)
    assert np.max(np.abs(pts[:, 0])) == pytest.approx(1.0)
    assert np.max(np.abs(pts[:, 1])) == pytest.approx(2.0)
    with pytest.raises(DomainError):
        g.points(3)


def test_gauss_comparison_validation():
    with pytest.raises(DomainError):
        GaussComparison(sup_abs=-1.0)
    with pytest.raises(DomainError):
        GaussComparison(sup_abs=0.0, ks_1d=1.5)
