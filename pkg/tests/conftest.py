"""Shared fixtures: small analytically solvable systems wrapped as catalog
entries, so phase/sensitivity/FTLE machinery can be checked against exact
answers without touching the expensive shipped models."""

import math
import os

os.environ.setdefault("NUMBA_THREADING_LAYER", "workqueue")

import numpy as np
import pytest

from phasesens.dynamics import Observable, make_system
from phasesens.models import ModelCatalogEntry, SegmentSpec


def axis_segment(fixed, axis, lo, hi):
    a = np.array(fixed, dtype=float)
    b = a.copy()
    a[axis] = lo
    b[axis] = hi
    return SegmentSpec(lo=a, hi=b)


def make_entry(system, omega0, observable, horizon_T, rel_tol,
               seed_state, n_per_cycle=64, bursting=False):
    dim = system.dim
    e = np.zeros(dim)
    e[0] = 1.0
    return ModelCatalogEntry(
        system=system, omega0=omega0, observable=observable,
        horizon_T=horizon_T, rel_tol=rel_tol,
        sensitivity_set_A=axis_segment(seed_state, 0, 0.0, 1.0),
        sensitivity_direction_e=e, n_pt_default=100,
        bursting=bursting, n_per_cycle=n_per_cycle,
        seed_state=np.asarray(seed_state, dtype=float))


@pytest.fixture(scope="session")
def circle_entry():
    """Rotation at constant rate: the averaged phase of state (theta0,)
    equals theta0 exactly, with modulus scale/2."""
    omega = 2.0
    sys_c = make_system("circle_test", "continuous", 1, kernel_id=2,
                        param_vector=(omega,), params={"omega": omega},
                        observable=Observable(1, 0, label="cos"),
                        omega0=omega, state_names=("theta",))
    return make_entry(sys_c, omega, Observable(1, 0, label="cos"),
                      horizon_T=8.0 * 2.0 * math.pi / omega,
                      rel_tol=1e-9, seed_state=[0.3])


@pytest.fixture(scope="session")
def harmonic_system():
    """dx/dt = y, dy/dt = -x; fundamental matrix is an exact rotation."""
    return make_system("harmonic_test", "continuous", 2, kernel_id=1,
                       param_vector=(), params={},
                       observable=Observable(0, 0, label="x"),
                       omega0=1.0, state_names=("x", "y"))


@pytest.fixture(scope="session")
def diag_system():
    """dx/dt = 2x, dy/dt = -y; Lyapunov exponents are exactly {2, -1}."""
    return make_system("diag_test", "continuous", 2, kernel_id=3,
                       param_vector=(2.0, -1.0), params={"a": 2.0, "b": -1.0},
                       observable=Observable(0, 0, label="x"),
                       omega0=None, state_names=("x", "y"))


@pytest.fixture(scope="session")
def linear_growth_system():
    """dx/dt = 2x: trajectories blow up, for escape-flag tests."""
    return make_system("growth_test", "continuous", 1, kernel_id=0,
                       param_vector=(2.0,), params={"a": 2.0},
                       observable=Observable(0, 0, label="x"),
                       omega0=None, state_names=("x",))


@pytest.fixture(scope="session")
def decay_system():
    """dx/dt = -x/2: monotone decay, no periodic structure."""
    return make_system("decay_test", "continuous", 1, kernel_id=0,
                       param_vector=(-0.5,), params={"a": -0.5},
                       observable=Observable(0, 0, label="x"),
                       omega0=None, state_names=("x",))


@pytest.fixture(scope="session")
def scale_map_system():
    """x -> x/2: tangent factor 1/2 per step, exponent ln(1/2)."""
    return make_system("scale_map_test", "discrete", 1, kernel_id=0,
                       param_vector=(0.5,), params={"c": 0.5},
                       observable=Observable(0, 0, label="x"),
                       omega0=None, state_names=("x",))


@pytest.fixture(scope="session")
def rotation_map_system():
    """y -> y + nu (mod 1): rotation number is exactly nu."""
    nu = 0.3819660112501051
    return make_system("rotation_map_test", "discrete", 1, kernel_id=1,
                       param_vector=(nu,), params={"nu": nu},
                       observable=Observable(2, 0, label="angle"),
                       omega0=2.0 * math.pi * nu, state_names=("y",),
                       angle_index=0)


def weierstrass_graph(n=65536, k_max=7):
    """Lacunary cosine series with box-counting dimension exactly 3/2:
    amplitude halves while frequency quadruples, giving dimension
    2 - ln 2 / ln 4.  Sampled on [0, 1) with the finest retained frequency
    resolved by 4 samples per oscillation."""
    x = np.arange(n) / n
    y = np.zeros(n)
    for k in range(k_max + 1):
        y += 0.5 ** k * np.cos(2.0 * np.pi * 4 ** k * x)
    return x, y
