"""Phase response curves and box-counting dimension, checked against graphs
whose dimension is known: lines and constants (dimension 1) and a lacunary
cosine series built so amplitude halves while frequency quadruples
(dimension exactly 1.5)."""

import math

import numpy as np
import pytest
from conftest import make_entry, weierstrass_graph

from phasesens.dynamics import Observable
from phasesens.errors import FitFailureError
from phasesens.prc import (PRCCurve, box_counting_dimension, prc_curve,
                           wrap_to_pi)

TWO_PI = 2.0 * math.pi


def synthetic_curve(x, y):
    return PRCCurve(thetas=np.asarray(x, float),
                    responses=np.asarray(y, float),
                    converged=np.ones(len(x), dtype=bool),
                    perturbation=np.zeros(1), model="synthetic")


def test_wrap_to_pi_principal_branch():
    assert wrap_to_pi(math.pi) == pytest.approx(math.pi)
    assert wrap_to_pi(-math.pi) == pytest.approx(math.pi)
    assert wrap_to_pi(3.5 * math.pi) == pytest.approx(-0.5 * math.pi)
    vals = wrap_to_pi(np.linspace(-20.0, 20.0, 101))
    assert np.all((vals > -math.pi - 1e-12) & (vals <= math.pi + 1e-12))
    assert wrap_to_pi(0.25) == pytest.approx(0.25, abs=1e-15)


def rotation_entry_with_reference(circle_entry):
    entry = make_entry(circle_entry.system, circle_entry.omega0,
                       circle_entry.observable, circle_entry.horizon_T,
                       1e-9, [0.3])
    entry.reference_gamma_point = np.array([0.0])
    entry.reference_T0 = TWO_PI / circle_entry.omega0
    return entry


def test_prc_constant_for_rotation(circle_entry):
    """Perturbing the angle by delta shifts the asymptotic phase by exactly
    delta at every point of the cycle."""
    entry = rotation_entry_with_reference(circle_entry)
    curve = prc_curve(entry, np.array([0.1]), n_theta=128)
    assert curve.converged.all()
    assert curve.thetas.size == 128
    np.testing.assert_allclose(curve.responses, 0.1, atol=1e-8)


def test_prc_zero_perturbation_gives_zero_response(circle_entry):
    entry = rotation_entry_with_reference(circle_entry)
    curve = prc_curve(entry, np.array([0.0]), n_theta=64)
    assert curve.converged.all()
    np.testing.assert_allclose(curve.responses, 0.0, atol=1e-9)


def test_prc_input_validation(circle_entry, scale_map_system):
    entry = rotation_entry_with_reference(circle_entry)
    with pytest.raises(ValueError, match="n_theta"):
        prc_curve(entry, np.array([0.1]), n_theta=32)
    with pytest.raises(ValueError, match="shape"):
        prc_curve(entry, np.array([0.1, 0.2]))
    map_entry = make_entry(scale_map_system, 1.0,
                           Observable(0, 0, label="x"), horizon_T=100,
                           rel_tol=None, seed_state=[1.0])
    with pytest.raises(ValueError, match="continuous"):
        prc_curve(map_entry, np.array([0.1]))


def test_curve_validation_and_restriction():
    with pytest.raises(ValueError, match="mismatched"):
        PRCCurve(thetas=np.arange(3.0), responses=np.zeros(2),
                 converged=np.ones(3, bool), perturbation=np.zeros(1),
                 model="m")
    with pytest.raises(ValueError, match="increasing"):
        synthetic_curve([0.0, 2.0, 1.0], [0.0, 0.0, 0.0])
    curve = synthetic_curve([0.0, 1.0, 2.0, 3.0], [5.0, 6.0, 7.0, 8.0])
    sub = curve.restricted(0.5, 2.5)
    np.testing.assert_allclose(sub.thetas, [1.0, 2.0])
    np.testing.assert_allclose(sub.responses, [6.0, 7.0])
    with pytest.raises(ValueError, match="empty"):
        curve.restricted(10.0, 11.0)


def test_line_graph_has_dimension_one():
    t = np.linspace(0.0, 6.0, 4096)
    rep = box_counting_dimension(synthetic_curve(t, 0.3 * t - 1.0))
    assert rep.dimension == pytest.approx(1.0, abs=1e-9)
    assert rep.fit_residual < 1e-12
    assert np.all(np.diff(rep.scales) < 0)


def test_flat_graph_has_dimension_one():
    t = np.linspace(0.0, 6.0, 4096)
    rep = box_counting_dimension(synthetic_curve(t, np.full(t.size, 0.7)))
    assert rep.dimension == pytest.approx(1.0, abs=1e-9)
    # a flat graph occupies exactly one box row per column
    np.testing.assert_array_equal(rep.counts,
                                  np.round(1.0 / rep.scales).astype(int))


def test_fractal_series_dimension_recovered():
    x, y = weierstrass_graph()
    rep = box_counting_dimension(synthetic_curve(x, y))
    assert rep.dimension == pytest.approx(1.5, abs=0.1)


def test_box_counts_nest_under_halving():
    """Halving the box size can at most quadruple (and never reduce) the
    occupied-box count when the scales are nested powers of two."""
    x, y = weierstrass_graph()
    rep = box_counting_dimension(synthetic_curve(x, y))
    ratios = rep.counts[1:] / rep.counts[:-1]
    assert np.all(ratios >= 1.0)
    assert np.all(ratios <= 4.0)


def test_non_converged_samples_are_gaps():
    t = np.linspace(0.0, 6.0, 2048)
    y = 0.5 * t
    curve = PRCCurve(thetas=t, responses=np.where(t < 3.0, y, np.nan),
                     converged=t < 3.0, perturbation=np.zeros(1),
                     model="gappy")
    rep = box_counting_dimension(curve)
    assert np.isfinite(rep.dimension)
    assert rep.dimension == pytest.approx(1.0, abs=0.05)


def test_box_counting_failure_modes():
    t = np.linspace(0.0, 6.0, 12)
    with pytest.raises(FitFailureError, match="too few"):
        box_counting_dimension(synthetic_curve(t, np.sin(t)))

    t = np.linspace(0.0, 6.0, 64)
    with pytest.raises(FitFailureError, match="resolvable"):
        box_counting_dimension(synthetic_curve(t, np.sin(t)))

    x, y = weierstrass_graph(n=4096, k_max=5)
    with pytest.raises(ValueError, match="scales"):
        box_counting_dimension(synthetic_curve(x, y), scales=[0.5, 2.0])
    with pytest.raises(FitFailureError, match="window"):
        box_counting_dimension(synthetic_curve(x, y),
                               fit_window=(0.2, 1.0))
