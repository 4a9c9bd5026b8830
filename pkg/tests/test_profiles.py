import numpy as np
import pytest

from sections import (ConvexProfile, DomainError, NonDecayError,
                      RadialProfile, check_product_conditions,
                      check_radial_conditions, modulus_xi,
                      parse_profile_spec, parse_radial_spec, profile_eval,
                      power_validity_radius)

from _oracles import dense_modulus


# ---------------------------------------------------------------------------
# Derivative evaluators
# ---------------------------------------------------------------------------

def test_profile_eval_closed_forms():
    assert profile_eval(ConvexProfile.power(2), 3.0, 0) == pytest.approx(9.0)
    assert profile_eval(ConvexProfile.cosh(), 0.0, 3) == pytest.approx(0.0)
    assert profile_eval(ConvexProfile.power(4), 2.0, 2) == pytest.approx(48.0)


def test_profile_eval_rejects_singular_points():
    with pytest.raises(DomainError):
        profile_eval(ConvexProfile.power(2.5), 0.0, 3)
    with pytest.raises(DomainError):
        profile_eval(ConvexProfile.power(1.5), 0.0, 2)
    with pytest.raises(DomainError):
        profile_eval(ConvexProfile.power(4), 1.0, 4)


def test_power_derivative_formulas_match_finite_differences():
    rng = np.random.Generator(np.random.Philox(11))
    for p in (1.5, 2.0, 2.5, 3.0, 4.0):
        prof = ConvexProfile.power(p)
        t = rng.uniform(0.3, 4.0, size=20) * rng.choice([-1.0, 1.0], size=20)
        h = 1e-5 * (1.0 + np.abs(t))
        for order in (1, 2, 3):
            fd = (prof.d(order - 1)(t + h) - prof.d(order - 1)(t - h)) / (2 * h)
            ref = prof.d(order)(t)
            assert np.all(np.abs(fd - ref) <= 1e-5 * (1.0 + np.abs(ref)))


def test_builtin_families_match_finite_differences():
    rng = np.random.Generator(np.random.Philox(12))
    for prof in (ConvexProfile.cosh(), ConvexProfile.gaussian()):
        t = rng.uniform(-4.0, 4.0, size=20)
        h = 1e-5 * (1.0 + np.abs(t))
        for order in (1, 2, 3):
            fd = (prof.d(order - 1)(t + h) - prof.d(order - 1)(t - h)) / (2 * h)
            ref = prof.d(order)(t)
            assert np.all(np.abs(fd - ref) <= 1e-5 * (1.0 + np.abs(ref)))


def test_custom_profile_registration_checks_consistency():
    good = ConvexProfile.custom(
        lambda t: np.sqrt(1.0 + t ** 2),
        lambda t: t / np.sqrt(1.0 + t ** 2),
        lambda t: (1.0 + t ** 2) ** -1.5,
        lambda t: -3.0 * t * (1.0 + t ** 2) ** -2.5,
        tag="sqrt1p")
    assert profile_eval(good, 1.0, 1) == pytest.approx(1.0 / np.sqrt(2.0))

    with pytest.raises(DomainError):
        ConvexProfile.custom(
            lambda t: np.sqrt(1.0 + t ** 2),
            lambda t: t / np.sqrt(1.0 + t ** 2),
            lambda t: (1.0 + t ** 2) ** -1.5,
            lambda t: 3.0 * t * (1.0 + t ** 2) ** -2.5,   # wrong sign
            tag="broken")


def test_reflection_flips_odd_derivatives():
    prof = ConvexProfile.custom(
        lambda t: (t - 1.0) ** 4,
        lambda t: 4.0 * (t - 1.0) ** 3,
        lambda t: 12.0 * (t - 1.0) ** 2,
        lambda t: 24.0 * (t - 1.0),
        tag="shifted")
    ref = prof.reflected()
    assert ref.eval(-2.0, 0) == pytest.approx(prof.eval(2.0, 0))
    assert ref.eval(-2.0, 1) == pytest.approx(-prof.eval(2.0, 1))
    assert ref.eval(-2.0, 2) == pytest.approx(prof.eval(2.0, 2))
    assert ref.eval(-2.0, 3) == pytest.approx(-prof.eval(2.0, 3))


def test_radial_families_and_custom_registration():
    rho = RadialProfile.power(3)
    assert rho.eval(2.0, 0) == pytest.approx(8.0)
    assert rho.eval(2.0, 1) == pytest.approx(12.0)
    assert RadialProfile.half_square().eval(3.0, 1) == pytest.approx(3.0)
    assert RadialProfile.exp().eval(1.0, 2) == pytest.approx(np.e)

    with pytest.raises(DomainError):
        RadialProfile.custom(
            lambda t: np.log1p(t),
            lambda t: -1.0 / (1.0 + t),     # wrong sign: fails rho' > 0
            lambda t: -1.0 / (1.0 + t) ** 2,
            tag="badlog")


# ---------------------------------------------------------------------------
# Smoothness modulus
# ---------------------------------------------------------------------------

def test_modulus_gaussian_is_zero():
    assert modulus_xi(ConvexProfile.gaussian(), 5.0, 1.0) == 0.0


def test_modulus_power4_matches_closed_form_and_paper_bound():
    xi = modulus_xi(ConvexProfile.power(4), 1.0, 10.0)
    s = (12.0 * 100.0) ** -0.5
    analytic = 24.0 * (10.0 + s) / 1200.0 ** 1.5
    assert xi == pytest.approx(analytic, rel=1e-9)
    assert xi == pytest.approx(5.79e-3, rel=1e-3)
    assert xi <= 2.0 * 10.0 ** -2.0     # 2 t^(-p/2) at p=4, t=10


def test_modulus_cosh_near_exponential_decay():
    xi = modulus_xi(ConvexProfile.cosh(), 1.0, 5.0)
    s = (np.exp(5.0) + np.exp(-5.0)) ** -0.5
    analytic = ((np.exp(5.0 + s) - np.exp(-5.0 - s))
                / (np.exp(5.0) + np.exp(-5.0)) ** 1.5)
    assert xi == pytest.approx(analytic, rel=1e-9)
    ref = np.exp(-2.5)
    assert ref / 2.0 <= xi <= 2.0 * ref


def test_modulus_against_dense_grid_oracle():
    for prof, r, t in ((ConvexProfile.power(4), 1.0, 10.0),
                       (ConvexProfile.power(3), 0.5, 4.0),
                       (ConvexProfile.cosh(), 1.0, 5.0)):
        assert modulus_xi(prof, r, t) == pytest.approx(
            dense_modulus(prof, r, t), rel=1e-6)


def test_modulus_growth_detection():
    # log cosh is convex but its normalized third derivative grows like e^w.
    prof = ConvexProfile.custom(
        lambda t: np.logaddexp(t, -t) - np.log(2.0),
        lambda t: np.tanh(t),
        lambda t: 1.0 / np.cosh(t) ** 2,
        lambda t: -2.0 * np.tanh(t) / np.cosh(t) ** 2,
        tag="logcosh")
    with pytest.raises(NonDecayError):
        modulus_xi(prof, 1.0, 0.1)


def test_modulus_requires_positive_curvature():
    prof = ConvexProfile.custom(
        lambda t: t ** 3, lambda t: 3.0 * t ** 2, lambda t: 6.0 * t,
        lambda t: 6.0 * np.ones_like(np.asarray(t, dtype=float)),
        tag="cubic")
    with pytest.raises(DomainError):
        modulus_xi(prof, 1.0, 2.0)   # g'' < 0 on the negative branch


def test_modulus_monotone_in_r_and_t():
    t_grid = np.array([2.0, 3.0, 4.5, 7.0, 10.0])
    r_grid = np.array([0.2, 0.4, 0.8, 1.6, 3.2])
    for prof in (ConvexProfile.power(4), ConvexProfile.power(2),
                 ConvexProfile.cosh(), ConvexProfile.gaussian()):
        table = np.array([[modulus_xi(prof, r, t) for t in t_grid]
                          for r in r_grid])
        slack = 1e-12 * (1.0 + table)
        assert np.all(np.diff(table, axis=1) <= slack[:, 1:])      # down in t
        assert np.all(np.diff(table, axis=0) >= -slack[1:, :])     # up in r


def test_power_bound_on_validity_region():
    for p in (1.5, 2.0, 3.0, 4.0):
        prof = ConvexProfile.power(p)
        for t in (2.0, 4.0, 8.0, 16.0, 32.0):
            r_max = power_validity_radius(p, t)
            for frac in (0.999, 0.5, 0.1):
                xi = modulus_xi(prof, frac * r_max, t)
                assert xi * t ** (p / 2.0) <= 2.0


# ---------------------------------------------------------------------------
# Hypothesis diagnostics
# ---------------------------------------------------------------------------

def test_product_conditions_equal_power_profiles_pass():
    profs = [ConvexProfile.power(4)] * 3
    rep = check_product_conditions(profs, sigma=1.5, omega=2.0, t0=1.0,
                                   t_grid=[2.0, 5.0, 10.0])
    assert rep.passed
    assert rep.first_violation is None


def test_product_conditions_mixed_powers_fail_balance():
    profs = [ConvexProfile.power(2), ConvexProfile.power(4)]
    rep = check_product_conditions(profs, sigma=2.0, omega=0.5, t0=1.0,
                                   t_grid=[100.0])
    assert not rep.passed
    assert any(not r.ok for r in rep.balance)


def test_product_conditions_gaussian_growth():
    profs = [ConvexProfile.gaussian()] * 2
    rep = check_product_conditions(profs, sigma=1.1, omega=0.9, t0=1.0,
                                   t_grid=[3.0, 30.0])
    assert rep.passed
    rep = check_product_conditions(profs, sigma=1.1, omega=1.1, t0=1.0,
                                   t_grid=[3.0])
    assert not rep.passed   # t g''/g' = 1 < 1.1


def test_product_conditions_reject_grid_inside_t0():
    with pytest.raises(DomainError):
        check_product_conditions([ConvexProfile.gaussian()] * 2, 1.5, 0.5,
                                 t0=2.0, t_grid=[1.0])


def test_radial_conditions_power_and_exp_pass():
    rep = check_radial_conditions(RadialProfile.power(3), 2.0,
                                  [2.0, 4.0, 8.0, 16.0])
    assert rep.passed
    rep = check_radial_conditions(RadialProfile.exp(), 1.0, [2.0, 4.0, 8.0])
    assert rep.passed


def test_radial_conditions_log_profile_fails():
    rho = RadialProfile.custom(
        lambda t: np.log1p(t),
        lambda t: 1.0 / (1.0 + t),
        lambda t: -1.0 / (1.0 + t) ** 2,
        tag="log1p")
    rep = check_radial_conditions(rho, 1.0, [10.0, 100.0, 1000.0])
    assert not rep.passed


def test_spec_string_parsers():
    assert parse_profile_spec("power:4").tag == "power:4"
    assert parse_profile_spec("cosh").tag == "cosh"
    assert parse_profile_spec("gaussian").tag == "gaussian"
    assert parse_radial_spec("halfsquare").tag == "halfsquare"
    assert parse_radial_spec("power:3").tag == "power:3"
    with pytest.raises(DomainError):
        parse_profile_spec("power")
    with pytest.raises(DomainError):
        parse_radial_spec("nope")
