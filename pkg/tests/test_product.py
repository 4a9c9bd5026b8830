import math

import numpy as np
import pytest

from sections import (ConvexProfile, DegenerateCurvatureError, Direction,
                      DomainError, ProductDensity, RangeError, ShellGrid,
                      build_frame, frame_from_dict, frame_to_dict,
                      modulus_xi, section_error, solve_lagrange)

from _oracles import brute_force_line_min

LOG_2PI = math.log(2.0 * math.pi)


def power_density(p, n):
    return ProductDensity(tuple(ConvexProfile.power(p) for _ in range(n)))


# ---------------------------------------------------------------------------
# Lagrange solve
# ---------------------------------------------------------------------------

def test_gaussian_apex_is_scaled_direction():
    dens = ProductDensity((ConvexProfile.gaussian(),) * 3)
    d = Direction(np.array([2.0, 1.0, 2.0]))
    y, lam = solve_lagrange(dens, d, 5.0)
    assert np.allclose(y, 5.0 * d.theta, atol=1e-12)
    assert lam == pytest.approx(5.0, abs=1e-12)


def test_power4_diagonal_apex():
    dens = power_density(4, 2)
    y, lam = solve_lagrange(dens, Direction(np.ones(2)), 10.0)
    assert np.allclose(y, 10.0 / np.sqrt(2.0), atol=1e-10)
    assert y[0] == pytest.approx(7.0711, abs=5e-5)


def test_power4_skew_direction_matches_brute_force():
    dens = power_density(4, 2)
    d = Direction(np.array([0.6, 0.8]))
    y, lam = solve_lagrange(dens, d, 10.0)
    # Stationarity: gradient ratio equals the direction ratio.
    g1 = dens.profiles[0].d(1)
    assert float(g1(y[0]) / g1(y[1])) == pytest.approx(0.6 / 0.8, rel=1e-10)
    assert float(np.dot(d.theta, y)) == pytest.approx(10.0, rel=1e-12)
    oracle = brute_force_line_min(dens.profiles, d.theta, 10.0, span=8.0)
    assert np.allclose(y, oracle, atol=1e-5)


def test_negative_direction_coordinates_are_reflected():
    dens = power_density(4, 2)
    d = Direction(np.array([0.6, -0.8]))
    y, lam = solve_lagrange(dens, d, 10.0)
    assert float(np.dot(d.theta, y)) == pytest.approx(10.0, rel=1e-12)
    assert y[1] < 0
    # Mirror of the all-positive solution.
    y_pos, _ = solve_lagrange(dens, Direction(np.array([0.6, 0.8])), 10.0)
    assert np.allclose(y, y_pos * np.array([1.0, -1.0]), atol=1e-12)


def test_bounded_slope_profile_raises_range_error():
    prof = ConvexProfile.custom(
        lambda t: np.sqrt(1.0 + t ** 2),
        lambda t: t / np.sqrt(1.0 + t ** 2),
        lambda t: (1.0 + t ** 2) ** -1.5,
        lambda t: -3.0 * t * (1.0 + t ** 2) ** -2.5,
        tag="sqrt1p")
    dens = ProductDensity((prof, prof))
    with pytest.raises(RangeError):
        solve_lagrange(dens, Direction(np.array([0.9, 0.43588989435])), 5.0)


def test_direction_validation():
    with pytest.raises(DomainError):
        Direction(np.array([1.0, 0.0]))
    d = Direction(np.array([3.0, 4.0]))
    assert np.linalg.norm(d.theta) == pytest.approx(1.0, abs=1e-15)
    assert d.q == pytest.approx(0.6)


# ---------------------------------------------------------------------------
# Frame construction
# ---------------------------------------------------------------------------

def test_gaussian_frame_golden_values():
    dens = ProductDensity((ConvexProfile.gaussian(),) * 3)
    fr = build_frame(dens, Direction(np.ones(3)), 6.0)
    assert fr.log_alpha == pytest.approx(18.0 - math.log(2.0 * math.pi), abs=1e-12)
    assert np.allclose(fr.Q.T @ fr.Q, np.eye(2), atol=1e-12)
    assert np.allclose(fr.Q.T @ fr.theta, 0.0, atol=1e-12)


def test_power4_diagonal_frame_golden_values():
    # alpha and the column scale follow the equal-profile closed form
    # alpha = (2 pi)^(-(n-1)/2) exp(n g(T/sqrt(n))), beta = g''(T/sqrt(n))^(-1/2).
    dens = power_density(4, 2)
    fr = build_frame(dens, Direction(np.ones(2)), 10.0)
    assert fr.log_alpha == pytest.approx(5000.0 - 0.5 * LOG_2PI, abs=1e-9)
    assert np.linalg.norm(fr.Q) == pytest.approx(1.0 / math.sqrt(600.0), rel=1e-12)
    assert fr.y_min == pytest.approx(10.0 / math.sqrt(2.0), rel=1e-12)


def test_whitening_invariant_randomized():
    rng = np.random.Generator(np.random.Philox(77))
    families = [lambda: ConvexProfile.power(float(rng.uniform(1.5, 4.0))),
                ConvexProfile.cosh, ConvexProfile.gaussian]
    for trial in range(50):
        n = int(rng.choice([2, 3, 5]))
        profs = tuple(families[int(rng.integers(0, 3))]() for _ in range(n))
        dens = ProductDensity(profs)
        theta = rng.uniform(0.2, 1.0, size=n) * rng.choice([-1.0, 1.0], size=n)
        d = Direction(theta)
        T = float(rng.uniform(3.0, 30.0))
        fr = build_frame(dens, d, T)
        lam = fr.lam
        for i, prof in enumerate(profs):
            resid = abs(float(prof.d(1)(fr.y[i])) - lam * d.theta[i])
            assert resid <= 1e-8 * (1.0 + abs(lam))
        curv = np.array([float(p.d(2)(yi)) for p, yi in zip(profs, fr.y)])
        wh = fr.Q.T @ (curv[:, None] * fr.Q) - np.eye(n - 1)
        assert np.max(np.abs(wh)) <= 1e-10
        assert abs(float(np.dot(d.theta, fr.y)) - T) <= 1e-10 * T
        assert np.max(np.abs(fr.Q.T @ d.theta)) <= 1e-12


def test_log_alpha_normalization_identity():
    # -log(alpha f(y)) must equal (n-1) log sqrt(2 pi).
    dens = power_density(3, 3)
    fr = build_frame(dens, Direction(np.array([1.0, 2.0, 2.0])), 8.0)
    val = -(fr.log_alpha + float(dens.log_f(fr.y[None, :])[0]))
    assert val == pytest.approx(0.5 * 2 * LOG_2PI, abs=1e-10)


def test_apex_is_strict_minimum_on_hyperplane():
    dens = power_density(4, 3)
    d = Direction(np.array([0.5, 0.5, 1.0 / math.sqrt(2.0)]))
    fr = build_frame(dens, d, 12.0)
    g_apex = -float(dens.log_f(fr.y[None, :])[0])
    rng = np.random.Generator(np.random.Philox(5))
    for _ in range(100):
        v = rng.standard_normal(3)
        v -= np.dot(v, d.theta) * d.theta
        v /= np.linalg.norm(v)
        g_pert = -float(dens.log_f((fr.y + 1e-3 * v)[None, :])[0])
        assert g_pert > g_apex


def test_apex_coordinates_grow_with_offset():
    dens = power_density(3, 3)
    d = Direction(np.array([0.3, 0.5, 0.81]))
    prev = None
    ratios = []
    for T in (5.0, 10.0, 20.0, 40.0):
        fr = build_frame(dens, d, T)
        if prev is not None:
            assert np.all(fr.y > prev)
        prev = fr.y
        assert fr.y_min > 0
        ratios.append(fr.y_min / T)
    # The realized y_min/T ratio stabilizes for homogeneous profiles.
    assert ratios[-1] == pytest.approx(ratios[-2], rel=0.05)


def test_degenerate_curvature_detected():
    prof = ConvexProfile.custom(
        lambda t: (t - 2.0) ** 4,
        lambda t: 4.0 * (t - 2.0) ** 3,
        lambda t: 12.0 * (t - 2.0) ** 2,
        lambda t: 24.0 * (t - 2.0),
        tag="shifted4")
    dens = ProductDensity((prof, prof))
    with pytest.raises(DegenerateCurvatureError):
        build_frame(dens, Direction(np.ones(2)), 2.0 * math.sqrt(2.0))


# ---------------------------------------------------------------------------
# Section error
# ---------------------------------------------------------------------------

def test_gaussian_sections_are_exact():
    for n in (2, 3, 5):
        dens = ProductDensity((ConvexProfile.gaussian(),) * n)
        theta = np.linspace(1.0, 2.0, n) * np.where(np.arange(n) % 2, -1.0, 1.0)
        fr = build_frame(dens, Direction(theta), 8.0)
        cmp_ = section_error(dens, fr, 4.0)
        assert cmp_.sup_rel <= 1e-12
        assert cmp_.sup_abs <= 1e-12


def test_power4_diagonal_error_decay_is_quartic():
    # On the diagonal the apex is symmetric, the cubic term of the section
    # exponent cancels, and the measured deviation decays like T^(-p) = T^-4
    # (2 r^4 a^4 with a = (2 g'')^(-1/2)), faster than the generic cubic
    # envelope which only guarantees T^(-p/2).
    dens = power_density(4, 2)
    d = Direction(np.ones(2))
    sups = []
    preds = []
    for T in (5.0, 10.0, 20.0, 40.0):
        fr = build_frame(dens, d, T)
        cmp_ = section_error(dens, fr, 2.0)
        sups.append(cmp_.sup_rel)
        a4 = (2.0 * 12.0 * (T / math.sqrt(2.0)) ** 2) ** -2.0
        preds.append(-math.expm1(-2.0 * 2.0 ** 4 * a4))
    assert np.all(np.diff(sups) < 0)
    assert np.allclose(sups, preds, rtol=1e-6)
    slope = np.polyfit(np.log([5.0, 10.0, 20.0, 40.0]), np.log(sups), 1)[0]
    assert slope == pytest.approx(-4.0, abs=0.05)


def test_bound_surrogate_dominates_measured_error():
    dens = power_density(4, 3)
    d = Direction(np.array([0.5, 0.5, 1.0 / math.sqrt(2.0)]))
    fr = build_frame(dens, d, 20.0)
    cmp_ = section_error(dens, fr, 1.0)
    assert cmp_.bound_valid
    assert cmp_.sup_rel <= cmp_.bound_surrogate / 2.0
    xi = modulus_xi(dens.profiles[0], 1.0, fr.y_min)
    assert cmp_.bound_surrogate == pytest.approx(3.0 * xi, rel=1e-12)


def test_bound_invalid_flag_when_surrogate_large():
    dens = power_density(1.5, 2)
    fr = build_frame(dens, Direction(np.ones(2)), 3.0)
    cmp_ = section_error(dens, fr, 3.0)
    assert cmp_.bound_surrogate > 6.0
    assert not cmp_.bound_valid


def test_frame_basis_covariance():
    # A different complement basis rotates Q but leaves the metrics alone.
    dens = power_density(4, 3)
    d = Direction(np.array([0.5, 0.5, 1.0 / math.sqrt(2.0)]))
    fr0 = build_frame(dens, d, 15.0)
    fr1 = build_frame(dens, d, 15.0, basis_index=0)
    assert not np.allclose(fr0.Q, fr1.Q)
    # Q1 = Q0 O for an orthogonal O (both whiten the same quadratic form).
    O = np.linalg.lstsq(fr0.Q, fr1.Q, rcond=None)[0]
    assert np.allclose(O.T @ O, np.eye(2), atol=1e-10)
    # The finite direction set is only approximately rotation invariant in
    # m >= 2, so the sup agrees to grid resolution there.
    e0 = section_error(dens, fr0, 2.0)
    e1 = section_error(dens, fr1, 2.0)
    assert e0.sup_rel == pytest.approx(e1.sup_rel, rel=1e-3)

    # In m = 1 the two-point direction set maps to itself under any
    # orthogonal change, so the sup is invariant to full precision.
    dens2 = power_density(4, 2)
    d2 = Direction(np.array([0.6, 0.8]))
    g0 = section_error(dens2, build_frame(dens2, d2, 15.0), 2.0)
    g1 = section_error(dens2, build_frame(dens2, d2, 15.0, basis_index=0), 2.0)
    assert g0.sup_rel == pytest.approx(g1.sup_rel, abs=1e-10)


def test_section_error_grid_metadata_and_ks():
    dens = ProductDensity((ConvexProfile.gaussian(),) * 2)
    fr = build_frame(dens, Direction(np.ones(2)), 5.0)
    grid = ShellGrid(r=3.0, shells=10, directions=64)
    cmp_ = section_error(dens, fr, 3.0, grid=grid)
    assert cmp_.n_points == 1 + 10 * 2        # m = 1: two directions
    assert cmp_.max_spacing == pytest.approx(0.3)
    assert cmp_.ks_1d <= 1e-10                # exact Gaussian section


def test_frame_round_trip_serialization():
    dens = power_density(4, 3)
    fr = build_frame(dens, Direction(np.array([1.0, 2.0, 2.0])), 9.0)
    fr2 = frame_from_dict(frame_to_dict(fr))
    assert np.array_equal(fr.y, fr2.y)
    assert np.array_equal(fr.Q, fr2.Q)
    assert fr.log_alpha == fr2.log_alpha
    e1 = section_error(dens, fr, 2.0)
    e2 = section_error(dens, fr2, 2.0)
    assert e1.sup_rel == e2.sup_rel
    assert e1.sup_abs == e2.sup_abs
