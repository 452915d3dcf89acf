"""Sensitivity estimators validated against analytic phase stubs with known
scaling exponents (exact power laws, lattice-aligned exceedance sets) and
against the constant-rate rotation, whose phase is globally smooth."""

import math

import numpy as np
import pytest
from conftest import axis_segment

from phasesens.errors import FitFailureError
from phasesens.sensitivity import (SensitivityCurve, SensitivitySample,
                                   default_epsilons, geodesic_distance,
                                   infinitesimal_coefficient, mdtheta_curve,
                                   pair_table, sensitivity_curve,
                                   two_point_sensitivity)

SEG = axis_segment([2.0, 0.0], 1, 0.0, 1.0)   # x = 2 fixed, y in [0, 1]
E_X = np.array([1.0, 0.0])


def power_phase(alpha, scale=1.0):
    """Phase depending only on the distance from the plane x = 2:
    theta = scale * |x - 2|^alpha, everywhere converged."""
    def fn(points):
        theta = scale * np.abs(points[:, 0] - 2.0) ** alpha
        return theta, np.ones(len(points), dtype=bool)
    return fn


def test_geodesic_distance_scalar_and_array():
    assert geodesic_distance(0.1, 6.2) == pytest.approx(
        0.1 + 2.0 * math.pi - 6.2, abs=1e-12)
    assert geodesic_distance(1.0, 1.0) == 0.0
    assert geodesic_distance(0.0, math.pi) == pytest.approx(math.pi)
    a = np.array([0.0, 1.0, 3.0])
    b = np.array([6.28, 2.0, 0.0])
    d = geodesic_distance(a, b)
    assert d.shape == (3,)
    np.testing.assert_allclose(d, geodesic_distance(b, a))
    assert np.all(d <= math.pi + 1e-12)


def test_default_epsilons_span_and_order():
    eps = default_epsilons(0.05)
    assert eps.size == 12
    assert np.all(np.diff(eps) < 0)
    assert eps[0] == pytest.approx(0.05 * 1e-2, rel=1e-12)
    assert eps[-1] == pytest.approx(0.05 * 1e-7, rel=1e-12)
    with pytest.raises(ValueError):
        default_epsilons(0.0)


def test_exact_power_law_recovered():
    curve = sensitivity_curve(None, A=SEG, n_pt=100, e=E_X,
                              phase_fn=power_phase(0.4))
    assert curve.alpha == pytest.approx(0.4, abs=1e-10)
    assert curve.beta == pytest.approx(0.6, abs=1e-10)
    assert curve.fit_residual < 1e-10
    assert curve.warning == ""
    eps = curve.epsilons
    np.testing.assert_allclose(curve.values, eps ** 0.4, rtol=1e-9)
    assert all(s.n_valid == 100 for s in curve.samples)


def test_fit_window_is_honored():
    eps_list = np.logspace(-2, -7, 11)
    curve = sensitivity_curve(None, A=SEG, n_pt=100, e=E_X,
                              eps_list=eps_list,
                              phase_fn=power_phase(0.25),
                              fit_window=(1e-6, 1e-4))
    lo, hi = curve.fit_window
    assert lo >= 1e-6 and hi <= 1e-4
    assert curve.alpha == pytest.approx(0.25, abs=1e-10)


def test_exceedance_estimator_exact_on_lattice_aligned_set():
    """Phase jumps by pi below a y-threshold that grows as the 0.3 power of
    the displacement; epsilons are chosen so the exceedance fraction equals
    the threshold exactly on the sampling lattice, giving slope 0.3 with
    zero residual."""
    def fn(points):
        eps = np.abs(points[:, 0] - 2.0)
        theta = np.where((eps > 0) & (points[:, 1] < eps ** 0.3),
                         math.pi, 0.0)
        return theta, np.ones(len(points), dtype=bool)

    counts = np.array([96, 64, 48, 32, 16, 8])
    eps_list = (counts / 100.0) ** (1.0 / 0.3)
    curve = mdtheta_curve(None, A=SEG, n_pt=100, e=E_X, eps_list=eps_list,
                          phase_fn=fn, delta_theta=0.5,
                          fit_window=(eps_list[-1], eps_list[0]))
    np.testing.assert_allclose(curve.values, counts / 100.0, rtol=0, atol=0)
    assert curve.alpha == pytest.approx(0.3, abs=1e-10)
    assert curve.beta == pytest.approx(0.7, abs=1e-10)
    assert curve.fit_residual < 1e-12


def test_table_reuse_matches_direct_calls():
    stub = power_phase(0.5)
    tab = pair_table(None, A=SEG, n_pt=100, e=E_X, phase_fn=stub)
    direct = sensitivity_curve(None, A=SEG, n_pt=100, e=E_X, phase_fn=stub)
    reused = sensitivity_curve(None, table=tab)
    assert reused.alpha == direct.alpha
    np.testing.assert_array_equal(reused.values, direct.values)
    md_direct = mdtheta_curve(None, A=SEG, n_pt=100, e=E_X, phase_fn=stub,
                              delta_theta=1e-4)
    md_reused = mdtheta_curve(None, table=tab, delta_theta=1e-4)
    np.testing.assert_array_equal(md_reused.values, md_direct.values)


def test_two_point_sensitivity_stub_and_failure():
    stub = power_phase(1.0, scale=2.0)
    f = two_point_sensitivity(None, [2.0, 0.5], 0.01, E_X, phase_fn=stub)
    assert f == pytest.approx(0.02, abs=1e-14)

    def broken(points):
        n = len(points)
        return np.zeros(n), np.zeros(n, dtype=bool)

    assert two_point_sensitivity(None, [2.0, 0.5], 0.01, E_X,
                                 phase_fn=broken) is None
    with pytest.raises(ValueError):
        two_point_sensitivity(None, [2.0, 0.5], -1.0, E_X, phase_fn=stub)


def test_two_point_sensitivity_on_rotation(circle_entry):
    f = two_point_sensitivity(circle_entry, [0.5], 0.01, np.array([1.0]))
    assert f == pytest.approx(0.01, abs=1e-8)


def test_smooth_phase_has_unit_exponent(circle_entry):
    """On the rotation the phase map is an isometry, so the two-point
    sensitivity equals epsilon and the fitted exponent is 1 (beta = 0)."""
    curve = sensitivity_curve(circle_entry)
    assert curve.alpha == pytest.approx(1.0, abs=1e-4)
    assert curve.beta == pytest.approx(0.0, abs=1e-4)
    np.testing.assert_allclose(curve.values, curve.epsilons, rtol=1e-4)


def test_input_validation():
    stub = power_phase(0.4)
    with pytest.raises(ValueError, match="decreasing"):
        pair_table(None, A=SEG, n_pt=100, e=E_X,
                   eps_list=np.logspace(-7, -2, 8), phase_fn=stub)
    with pytest.raises(ValueError, match="at least 6"):
        pair_table(None, A=SEG, n_pt=100, e=E_X,
                   eps_list=np.logspace(-2, -7, 4), phase_fn=stub)
    with pytest.raises(ValueError, match="at least 100"):
        pair_table(None, A=SEG, n_pt=50, e=E_X, phase_fn=stub)
    with pytest.raises(ValueError, match="unit norm"):
        pair_table(None, A=SEG, n_pt=100, e=np.array([1.0, 1.0]),
                   phase_fn=stub)
    with pytest.raises(ValueError, match="required"):
        pair_table(None, n_pt=100, e=E_X, phase_fn=stub)
    with pytest.raises(ValueError, match="entry or a phase_fn"):
        two_point_sensitivity(None, [2.0, 0.5], 0.01, E_X)
    for bad in (0.0, math.pi):
        with pytest.raises(ValueError, match="delta_theta"):
            mdtheta_curve(None, A=SEG, n_pt=100, e=E_X, phase_fn=stub,
                          delta_theta=bad)


def test_narrow_fit_window_fails():
    eps_list = np.logspace(-2, -7, 11)
    with pytest.raises(FitFailureError):
        sensitivity_curve(None, A=SEG, n_pt=100, e=E_X, eps_list=eps_list,
                          phase_fn=power_phase(0.4),
                          fit_window=(eps_list[1] * 0.99, eps_list[0]))


def test_all_non_converged_fails():
    def dead(points):
        n = len(points)
        return np.zeros(n), np.zeros(n, dtype=bool)

    with pytest.raises(FitFailureError):
        sensitivity_curve(None, A=SEG, n_pt=100, e=E_X, phase_fn=dead)


def test_low_valid_fraction_excluded_from_default_window():
    """Pairs that fail to converge below a size threshold push the fit
    window to larger epsilons instead of silently fitting bad data."""
    eps_list = np.logspace(-2, -5, 7)

    def fn(points):
        eps = np.abs(points[:, 0] - 2.0)
        theta = eps ** 0.4
        bad = (eps > 0) & (eps < 3e-5) & (points[:, 1] >= 0.5)
        return theta, ~bad

    curve = sensitivity_curve(None, A=SEG, n_pt=100, e=E_X,
                              eps_list=eps_list, phase_fn=fn)
    assert curve.alpha == pytest.approx(0.4, abs=1e-10)
    # eps_list[6] = 1e-5 lost half its pairs, so the window starts above it
    assert curve.fit_window[0] == pytest.approx(eps_list[5], rel=1e-12)
    assert curve.samples[6].n_valid == 50


def test_zero_samples_dropped_with_warning():
    def fn(points):
        eps = np.abs(points[:, 0] - 2.0)
        theta = np.where(eps >= 1e-4, eps, 0.0)
        return theta, np.ones(len(points), dtype=bool)

    curve = sensitivity_curve(None, A=SEG, n_pt=100, e=E_X,
                              eps_list=np.logspace(-2, -6, 9), phase_fn=fn)
    assert "dropped" in curve.warning
    assert curve.alpha == pytest.approx(1.0, abs=1e-10)


def test_curve_dataclass_validation():
    s = [SensitivitySample(1e-2, 0.1, 100), SensitivitySample(1e-3, 0.05, 100)]
    with pytest.raises(ValueError, match="decreasing"):
        SensitivityCurve(samples=tuple(reversed(s)), alpha=0.5, beta=0.5,
                         fit_window=(1e-3, 1e-2), fit_residual=0.0)
    with pytest.raises(ValueError, match="beta"):
        SensitivityCurve(samples=tuple(s), alpha=0.5, beta=0.4,
                         fit_window=(1e-3, 1e-2), fit_residual=0.0)


def test_infinitesimal_coefficient_exact_power_law():
    curve = sensitivity_curve(None, A=SEG, n_pt=100, e=E_X,
                              phase_fn=power_phase(0.4))
    pairs = infinitesimal_coefficient(curve)
    assert len(pairs) == len(curve.samples) - 2
    for _, coeff in pairs:
        assert coeff == pytest.approx(0.6, abs=1e-10)


def test_infinitesimal_coefficient_skips_bad_neighbors():
    samples = (SensitivitySample(1e-2, 1e-1, 100),
               SensitivitySample(1e-3, float("nan"), 100),
               SensitivitySample(1e-4, 1e-3, 100),
               SensitivitySample(1e-5, 1e-4, 100),
               SensitivitySample(1e-6, 1e-5, 100))
    curve = SensitivityCurve(samples=samples, alpha=1.0, beta=0.0,
                             fit_window=(1e-6, 1e-2), fit_residual=0.0)
    pairs = infinitesimal_coefficient(curve)
    # interior samples 1 and 2 have a nan in their stencil; only sample 3
    # survives, with slope exactly 1
    assert len(pairs) == 1
    assert pairs[0][0] == pytest.approx(1e-5)
    assert pairs[0][1] == pytest.approx(0.0, abs=1e-10)

    short = SensitivityCurve(samples=samples[:2], alpha=1.0, beta=0.0,
                             fit_window=(1e-3, 1e-2), fit_residual=0.0)
    with pytest.raises(ValueError):
        infinitesimal_coefficient(short)
