import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wavekin.dispersion import (DispersionError, KINDS, invert_omega, make_dispersion,
                                validate_assumptions)


def test_schrodinger_values(schr):
    assert schr.omega(2.0) == 4.0
    assert schr.omega_prime(2.0) == 4.0


def test_bogoliubov_value(bog):
    assert bog.omega(1.0) == pytest.approx(np.sqrt(2.0), rel=1e-14)


def test_low_temp_offset_and_value():
    d = make_dispersion("low_temp_poly", (1, 2, 3))
    assert d.offset == 1.0
    assert d.omega(1.0) == pytest.approx(5.0, rel=1e-14)


@pytest.mark.parametrize("kind,params", [("schrodinger", ()), ("bogoliubov", (1, 1)),
                                         ("modified_bogoliubov", (1, 2, 3)), ("low_temp_poly", (1, 2, 3)),
                                         ("custom", (0.5, 0, 1, 0.1))])
def test_normalized_at_origin(kind, params):
    assert make_dispersion(kind, params).omega(0.0) == 0.0


def test_unknown_kind_rejected():
    with pytest.raises(DispersionError, match="phonon"):
        make_dispersion("phonon")


@pytest.mark.parametrize("kind,params", [("bogoliubov", (0, 1)), ("bogoliubov", (1, -1)),
                                         ("modified_bogoliubov", (1, 0, 1)), ("low_temp_poly", (1, 1, 0))])
def test_nonpositive_coefficients_rejected(kind, params):
    with pytest.raises(DispersionError, match="strictly positive"):
        make_dispersion(kind, params)


def test_wrong_coefficient_count():
    with pytest.raises(DispersionError):
        make_dispersion("bogoliubov", (1,))


def test_schrodinger_constants(schr):
    rep = validate_assumptions(schr)
    assert rep.c1_est == pytest.approx(2.0, rel=1e-12)
    assert rep.c2_est == pytest.approx(np.sqrt(2.0), rel=1e-12)
    assert rep.pass_iii and rep.pass_iv


def test_bogoliubov_c1_matches_dense_minimum(bog):
    # oracle: (1 + 2x^2) / (x sqrt(1 + x^2)) decreases to 2 and stays above it
    x = np.geomspace(1e-6, 1e6, 200_001)
    ratio = (1 + 2 * x * x) / (x * np.sqrt(1 + x * x))
    xm = x[x < 1e3]  # (1 + 2x^2)^2 - 4x^2(1 + x^2) = 1, resolvable in floats only for moderate x
    assert np.all((1 + 2 * xm * xm) ** 2 > 4 * xm * xm * (1 + xm * xm))
    rep = validate_assumptions(bog)
    assert rep.c1_est == pytest.approx(ratio.min(), rel=1e-9)
    assert rep.c1_est == pytest.approx(2.0, rel=1e-9)
    assert rep.c1_est >= 2.0 - 1e-12


def test_custom_linear_law_needs_c2_two():
    d = make_dispersion("custom", (0.0, 1.0), certify=False)
    rep = validate_assumptions(d)
    assert rep.pass_iii and rep.pass_iv
    assert rep.c2_est == pytest.approx(2.0, rel=1e-12)


def test_custom_callable_law():
    d = make_dispersion("custom", omega=lambda r: r ** 2 + r ** 4, omega_prime=lambda r: 2 * r + 4 * r ** 3)
    assert d.omega(1.0) == 2.0
    assert invert_omega(d, 2.0) == pytest.approx(1.0, rel=1e-12)


def test_validate_rejects_bad_arguments(schr):
    with pytest.raises(DispersionError):
        validate_assumptions(schr, n_samples=1)
    with pytest.raises(DispersionError):
        validate_assumptions(schr, r_max=0.0)


def test_non_finite_omega_reported():
    d = make_dispersion("custom", omega=lambda r: np.where(r > 10, np.inf, r * r),
                        omega_prime=lambda r: 2 * r, certify=False)
    with pytest.raises(DispersionError, match="non-finite"):
        validate_assumptions(d, 100, 100.0)


@pytest.mark.parametrize("kind,params,E,r", [("schrodinger", (), 9.0, 3.0),
                                             ("bogoliubov", (1, 1), np.sqrt(2.0), 1.0),
                                             ("low_temp_poly", (1, 2, 3), 5.0, 1.0)])
def test_invert_examples(kind, params, E, r):
    assert invert_omega(make_dispersion(kind, params), E) == pytest.approx(r, rel=1e-12)


def test_invert_negative_energy(schr):
    with pytest.raises(DispersionError):
        invert_omega(schr, -1.0)


@pytest.mark.parametrize("kind,params", [("schrodinger", ()), ("bogoliubov", (1, 1)),
                                         ("modified_bogoliubov", (1, 1, 1)), ("low_temp_poly", (1, 2, 3)),
                                         ("custom", (0.0, 0.0, 1.0, 0.5))])
def test_round_trip_and_monotone(kind, params):
    d = make_dispersion(kind, params)
    r = np.sort(np.random.default_rng(3).uniform(0, 1e3, 1000))
    om = d.omega(r)
    assert np.all(np.abs(d.inverse(om) - r) <= 1e-10 * r)
    assert np.all(np.diff(om) > 0)
    assert np.all(np.abs(om - d.omega(d.inverse(om))) <= 1e-12 * (1 + om))


def test_modified_bogoliubov_small_r_is_accurate():
    d = make_dispersion("modified_bogoliubov", (1.0, 1.0, 1.0))
    r = 1e-6
    assert d.omega(r) == pytest.approx(0.5 * r * r, rel=1e-9)


@settings(max_examples=60, deadline=None)
@given(st.floats(0.1, 10), st.floats(0.1, 10), st.floats(1e-4, 1e4))
def test_bogoliubov_round_trip_property(t1, t2, r):
    d = make_dispersion("bogoliubov", (t1, t2), certify=False)
    assert d.inverse(d.omega(r)) == pytest.approx(r, rel=1e-10)
    assert d.omega_prime(r) > 0


def test_all_kinds_listed():
    assert set(KINDS) == {"schrodinger", "bogoliubov", "modified_bogoliubov", "low_temp_poly", "custom"}
