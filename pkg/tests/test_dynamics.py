"""Integrator, map iteration, variational propagation, and period/rotation
estimation, checked against closed forms and an independent reference
integrator (scipy, test-only dependency)."""

import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from phasesens.dynamics import (Observable, Trajectory, estimate_period,
                                estimate_rotation_number, flow_endpoint,
                                integrate_flow, integrate_variational,
                                iterate_map, make_system)
from phasesens.errors import NotPeriodicError
from phasesens.models import lookup


# ---------------------------------------------------------------------------
# Continuous flow against closed forms and scipy.

def test_flow_matches_exponential(diag_system):
    x0 = np.array([1.5, -2.0])
    traj = integrate_flow(diag_system, x0, 2.0, rel_tol=1e-10, dense=40)
    expect = np.stack([x0[0] * np.exp(2.0 * traj.times),
                       x0[1] * np.exp(-traj.times)], axis=1)
    assert not traj.escaped
    np.testing.assert_allclose(traj.states, expect, rtol=1e-8)


def test_flow_matches_scipy_reference():
    entry = lookup("van_der_pol")
    x0 = np.array([1.1, -0.4])
    ts = np.linspace(0.0, 5.0, 51)
    ours = integrate_flow(entry.system, x0, 5.0, rel_tol=1e-10, dense=ts)
    ref = solve_ivp(lambda t, x: entry.system.vector_field(x), (0.0, 5.0),
                    x0, t_eval=ts, rtol=1e-11, atol=1e-12, method="DOP853")
    np.testing.assert_allclose(ours.states, ref.y.T, rtol=1e-7, atol=1e-9)


def test_flow_endpoint_agrees_with_dense_output(harmonic_system):
    x0 = np.array([0.7, 0.1])
    t = 3.21
    end, escaped = flow_endpoint(harmonic_system, x0, t, rel_tol=1e-11)
    traj = integrate_flow(harmonic_system, x0, t, rel_tol=1e-11, dense=7)
    assert not escaped
    np.testing.assert_allclose(end, traj.states[-1], rtol=1e-9)
    # harmonic motion is an exact rotation of the initial state
    expect = np.array([x0[0] * math.cos(t) + x0[1] * math.sin(t),
                       -x0[0] * math.sin(t) + x0[1] * math.cos(t)])
    np.testing.assert_allclose(end, expect, rtol=1e-9)


def test_escape_flag_truncates_trajectory(linear_growth_system):
    x0 = np.array([1.0])
    traj = integrate_flow(linear_growth_system, x0, 10.0, rel_tol=1e-9,
                          dense=100, divergence_bound=10.0)
    assert traj.escaped
    assert traj.times.size < 101
    assert np.all(np.abs(traj.states) <= 10.0 * (1.0 + 1e-9))
    end, escaped = flow_endpoint(linear_growth_system, x0, 10.0,
                                 divergence_bound=10.0)
    assert escaped


def test_flow_input_validation(harmonic_system):
    with pytest.raises(ValueError):
        integrate_flow(harmonic_system, np.zeros(3), 1.0)
    with pytest.raises(ValueError):
        integrate_flow(harmonic_system, np.zeros(2), -1.0)
    with pytest.raises(ValueError):
        integrate_flow(harmonic_system, np.zeros(2), 1.0,
                       dense=np.array([0.5, 0.2]))
    with pytest.raises(ValueError):
        iterate_map(harmonic_system, np.zeros(2), 5)


# ---------------------------------------------------------------------------
# Discrete maps.

def _pattern_map_step(x, gamma, a):
    s = math.sin(2.0 * math.pi * x[1])
    return np.array([(1.0 - gamma) * x[0] + a * s * s,
                     (x[0] + x[1] + a * s) % 1.0])


def test_map_orbit_matches_pure_python():
    entry = lookup("map_eq5")
    gamma = entry.system.params["gamma"]
    a = entry.system.params["a"]
    x = np.array([0.37, 0.82])
    orbit = iterate_map(entry.system, x, 25)
    y = x.copy()
    for k in range(25):
        np.testing.assert_allclose(orbit.states[k], y, rtol=0, atol=1e-12)
        y = _pattern_map_step(y, gamma, a)
    np.testing.assert_allclose(orbit.states[25], y, rtol=0, atol=1e-12)
    assert orbit.times[-1] == 25.0


def test_scale_map_orbit(scale_map_system):
    orbit = iterate_map(scale_map_system, np.array([8.0]), 3)
    np.testing.assert_allclose(orbit.states[:, 0],
                               [8.0, 4.0, 2.0, 1.0], rtol=0)
    with pytest.raises(ValueError):
        iterate_map(scale_map_system, np.array([1.0]), -1)


# ---------------------------------------------------------------------------
# Variational propagation.

def test_variational_rotation_matrix(harmonic_system):
    t = math.pi / 3.0
    fm = integrate_variational(harmonic_system, np.array([0.2, 0.5]), t,
                               rel_tol=1e-11)
    expect = np.array([[math.cos(t), math.sin(t)],
                       [-math.sin(t), math.cos(t)]])
    np.testing.assert_allclose(fm.matrix, expect, atol=1e-9)
    assert fm.horizon == t


def test_variational_diagonal(diag_system):
    fm = integrate_variational(diag_system, np.array([0.3, 0.4]), 1.5,
                               rel_tol=1e-11)
    expect = np.diag([math.exp(3.0), math.exp(-1.5)])
    np.testing.assert_allclose(fm.matrix, expect, rtol=1e-8, atol=1e-12)


def test_variational_map_product():
    entry = lookup("map_fig1b")
    x = np.array([0.41, 0.13])
    n = 6
    fm = integrate_variational(entry.system, x, n)
    m = np.eye(2)
    y = x.copy()
    for _ in range(n):
        m = entry.system.jacobian(y) @ m
        y = entry.system.vector_field(y)
    np.testing.assert_allclose(fm.matrix, m, rtol=1e-12)
    assert fm.horizon == n


# ---------------------------------------------------------------------------
# Period and rotation-number estimation.

def test_estimate_period_self_consistent():
    entry = lookup("van_der_pol")
    T0, w0 = estimate_period(entry.system, entry.seed_state, 20.0 * entry.T0,
                             period_hint=entry.T0, rel_tol=1e-9,
                             observable=entry.observable)
    assert abs(T0 - entry.reference_T0) / entry.reference_T0 < 1e-5
    assert abs(w0 * T0 - 2.0 * math.pi) < 1e-12


def test_estimate_period_needs_a_window_scale():
    entry = lookup("van_der_pol")
    with pytest.raises(ValueError):
        estimate_period(entry.system, entry.seed_state, 1.0)


def test_estimate_period_rejects_aperiodic_signal(decay_system):
    with pytest.raises(NotPeriodicError):
        estimate_period(decay_system, np.array([1.0]), 1.0,
                        period_hint=2.0, rel_tol=1e-9)


def test_rotation_number_exact(rotation_map_system):
    nu = rotation_map_system.params["nu"]
    est = estimate_rotation_number(rotation_map_system, np.array([0.2]),
                                   n_iters=100_000, n_transient=100)
    assert abs(est - nu) < 1e-12
    with pytest.raises(ValueError):
        estimate_rotation_number(rotation_map_system, np.array([0.2]),
                                 n_iters=100)


# ---------------------------------------------------------------------------
# Observables.

def test_observable_kinds():
    x = np.array([0.25, 1.1])
    assert Observable(0, 1, scale=2.0, offset=1.0)(x) == pytest.approx(3.2)
    assert Observable(1, 1)(x) == pytest.approx(math.cos(1.1))
    z = Observable(2, 0)(x)
    assert z == pytest.approx(complex(math.cos(math.pi / 2),
                                      math.sin(math.pi / 2)))


def test_make_system_rejects_unknown_kind():
    with pytest.raises(ValueError):
        make_system("bad", "hybrid", 1, kernel_id=0, param_vector=(1.0,),
                    params={}, observable=Observable(0, 0))
