"""Asymptotic phase from harmonic averages along trajectories.

The phase of a state is the argument of the time average of
g(x(t)) * exp(-i*omega0*t).  For continuous systems the average is a
trapezoid sum over a uniform quadrature grid evaluated on the integrator's
dense output.  The averaging window is snapped to a whole number of
reference cycles m * T0, where T0 is the refined return time once a
reference is built (else 2*pi/omega0): over whole cycles the uniform
trapezoid annihilates every off-target harmonic of the settled signal by
discrete orthogonality, so constant offsets and higher harmonics leak only
at roundoff level instead of O(1/(omega0*T)).  Bursting neuron entries
average over the final cycle of the window only; their long transients
otherwise swamp the cycle signal.

Discrete maps use the plain sum over t = 0..T.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numba
import numpy as np

from . import _engine
from .dynamics import (MAX_STEPS, Observable, default_divergence_bound,
                       iterate_map)

__all__ = [
    "PhaseValue",
    "GridSpec",
    "PhaseField",
    "fourier_average",
    "fourier_average_discrete",
    "phase_of",
    "phase_many",
    "phase_field",
    "modulus_floor",
    "wrap_angle",
]


@dataclass(frozen=True)
class PhaseValue:
    theta: float      # in [0, 2*pi); meaningful only when converged
    modulus: float    # magnitude of the harmonic average
    converged: bool


@dataclass(frozen=True)
class GridSpec:
    """Planar scan: two state coordinates vary, the rest are fixed.

    `base` supplies the fixed coordinates (entries at the varying axes are
    ignored).  Nodes are ordered row-major: axis 0 outer, axis 1 inner.
    """

    base: np.ndarray
    axes: Tuple[int, int]
    lows: Tuple[float, float]
    highs: Tuple[float, float]
    shape: Tuple[int, int]

    def __post_init__(self):
        if self.axes[0] == self.axes[1]:
            raise ValueError("grid axes must differ")
        if self.shape[0] < 1 or self.shape[1] < 1:
            raise ValueError("grid resolutions must be >= 1")

    def axis_values(self, k):
        n = self.shape[k]
        if n == 1:
            return np.array([self.lows[k]])
        return np.linspace(self.lows[k], self.highs[k], n)

    def nodes(self):
        a0 = self.axis_values(0)
        a1 = self.axis_values(1)
        pts = np.tile(self.base, (a0.size * a1.size, 1))
        pts[:, self.axes[0]] = np.repeat(a0, a1.size)
        pts[:, self.axes[1]] = np.tile(a1, a0.size)
        return pts


@dataclass(frozen=True)
class PhaseField:
    grid: GridSpec
    theta: np.ndarray      # (n0, n1)
    modulus: np.ndarray
    converged: np.ndarray  # bool

    def value_at(self, i, j):
        return PhaseValue(theta=float(self.theta[i, j]),
                          modulus=float(self.modulus[i, j]),
                          converged=bool(self.converged[i, j]))


def wrap_angle(a):
    """Map an angle (or array) to [0, 2*pi)."""
    return np.mod(a, 2.0 * math.pi)


def apply_workers(workers):
    """Clamp the requested worker count to the compiled thread pool.
    Results never depend on it; it only sets how many threads execute the
    independent per-point tasks."""
    n = max(1, min(int(workers), numba.config.NUMBA_NUM_THREADS))
    numba.set_num_threads(n)
    return n


def _window(entry, T):
    """Quadrature window for a continuous entry: (t_total, qt0, nq)."""
    t0 = entry.averaging_T0
    m = max(1, int(round(float(T) / t0)))
    n_per = entry.n_per_cycle
    if entry.bursting:
        return m * t0, (m - 1) * t0, n_per
    return m * t0, 0.0, m * n_per


def _observable(entry, observable):
    return entry.observable if observable is None else observable


def _batch_continuous(entry, points, T, observable, bound=None):
    obs = _observable(entry, observable)
    t_total, qt0, nq = _window(entry, T)
    if bound is None:
        bound = 1e6 * float(np.max(np.abs(points))) + 1e6
    are, aim, status = _engine.phase_batch_continuous(
        entry.system.kernel_id, entry.system.param_vector,
        np.ascontiguousarray(points, dtype=float), entry.rel_tol, bound,
        obs.kind, obs.index, obs.scale, obs.offset, entry.averaging_omega0,
        t_total, qt0, nq, MAX_STEPS)
    span = t_total - qt0
    return are / span, aim / span, status


def _batch_discrete(entry, points, T, observable, bound=None):
    obs = _observable(entry, observable)
    horizon = int(T)
    if bound is None:
        bound = 1e6 * float(np.max(np.abs(points))) + 1e6
    are, aim, status = _engine.phase_batch_discrete(
        entry.system.kernel_id, entry.system.param_vector,
        np.ascontiguousarray(points, dtype=float), bound,
        obs.kind, obs.index, obs.scale, obs.offset, entry.averaging_omega0,
        horizon)
    return are / horizon, aim / horizon, status


def fourier_average(entry, x, T=None, observable=None):
    """Trapezoid average of g(x(t)) e^{-i omega0 t} over the whole window
    (snapped to whole cycles).  Non-finite when the trajectory escapes."""
    if entry.kind != "continuous":
        raise ValueError(f"{entry.name} is not continuous; use "
                         f"fourier_average_discrete")
    T = entry.horizon_T if T is None else T
    if not T > 0:
        raise ValueError("averaging horizon must be positive")
    pts = np.asarray(x, dtype=float)[None, :]
    are, aim, status = _batch_continuous(entry, pts, T, observable)
    if status[0] != 0:
        return complex(np.nan, np.nan)
    return complex(are[0], aim[0])


def fourier_average_discrete(entry, x, T=None, observable=None):
    """(1/T) * sum_{t=0}^{T} g(x(t)) e^{-i omega0 t} along the map orbit."""
    if entry.kind != "discrete":
        raise ValueError(f"{entry.name} is not a map; use fourier_average")
    T = entry.horizon_T if T is None else T
    if int(T) < 1:
        raise ValueError("horizon must be >= 1")
    pts = np.asarray(x, dtype=float)[None, :]
    are, aim, status = _batch_discrete(entry, pts, T, observable)
    if status[0] != 0:
        return complex(np.nan, np.nan)
    return complex(are[0], aim[0])


def _settle_for_floor(entry):
    """A state on (close to) the attractor, for calibrating the modulus
    floor when no reference point is stored."""
    if entry.kind == "discrete":
        return iterate_map(entry.system, entry.seed_state, 1000).states[-1]
    from .dynamics import flow_endpoint
    settle = (13.0 if entry.bursting else 20.0) * entry.T0
    x, _ = flow_endpoint(entry.system, entry.seed_state, settle,
                         rel_tol=entry.rel_tol)
    return x


def modulus_floor(entry):
    """Convergence threshold: 1e-3 of the harmonic-average magnitude of g
    on the attractor itself (computed once per entry and cached)."""
    if entry._ref_modulus is None:
        x = (entry.reference_gamma_point
             if entry.reference_gamma_point is not None
             else _settle_for_floor(entry))
        if entry.kind == "discrete":
            avg = fourier_average_discrete(entry, x)
        else:
            pts = np.asarray(x, dtype=float)[None, :]
            are, aim, status = _batch_continuous(entry, pts, entry.horizon_T,
                                                 None)
            avg = complex(are[0], aim[0]) if status[0] == 0 else complex(0.0)
        entry._ref_modulus = abs(avg)
        if entry._ref_modulus == 0.0:
            raise ValueError(
                f"observable for {entry.name} has no cycle-frequency "
                f"harmonic on the attractor")
    return 1e-3 * entry._ref_modulus


def phase_of(entry, x, T=None, observable=None):
    """Averaged phase of one state.

    Bursting neuron entries average over only the final reference cycle of
    the window; other continuous entries use the whole window; maps sum the
    orbit.  The result is flagged non-converged when the trajectory escapes
    or the average's magnitude falls below the per-entry modulus floor
    (phaseless or nearly phaseless states)."""
    theta, modulus, converged = phase_many(entry, np.asarray(x, float)[None, :],
                                           T=T, observable=observable)
    return PhaseValue(theta=float(theta[0]), modulus=float(modulus[0]),
                      converged=bool(converged[0]))


def phase_many(entry, points, T=None, observable=None, workers=1):
    """Vectorized phase_of over rows of `points`.

    Returns (theta, modulus, converged) arrays.  Each point is an
    independent task; results are bitwise identical for any worker count.
    """
    apply_workers(workers)
    T = entry.horizon_T if T is None else T
    floor = modulus_floor(entry)
    points = np.asarray(points, dtype=float)
    if entry.kind == "discrete":
        are, aim, status = _batch_discrete(entry, points, T, observable)
    else:
        are, aim, status = _batch_continuous(entry, points, T, observable)
    theta = wrap_angle(np.arctan2(aim, are))
    modulus = np.hypot(are, aim)
    converged = (status == 0) & np.isfinite(modulus) & (modulus >= floor)
    return theta, modulus, converged


def phase_field(entry, grid, workers=1, T=None):
    """Phase at every node of a planar grid.  Per-node failures are
    recorded as non-converged values rather than raised."""
    nodes = grid.nodes()
    theta, modulus, converged = phase_many(entry, nodes, T=T, workers=workers)
    return PhaseField(grid=grid,
                      theta=theta.reshape(grid.shape),
                      modulus=modulus.reshape(grid.shape),
                      converged=converged.reshape(grid.shape))
