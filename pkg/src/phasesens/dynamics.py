"""System definitions and trajectory-level operations.

The flow of a continuous-time system is realized by an adaptive
Dormand-Prince 5(4) integrator with PI step-size control and quartic dense
output (see `_engine`).  Tolerances are purely relative: the absolute floor
is the smallest positive normal double.  Discrete-time systems are iterated
exactly, with modular reductions applied as each map definition requires.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import _engine
from ._kernels import jac as _k_jac
from ._kernels import map_jac as _k_map_jac
from ._kernels import map_step as _k_map_step
from ._kernels import observe as _k_observe
from ._kernels import rhs as _k_rhs
from .errors import IntegrationError, IterationError, NotPeriodicError

MAX_STEPS = 50_000_000

__all__ = [
    "Observable",
    "SystemDef",
    "Trajectory",
    "FundamentalMatrix",
    "integrate_flow",
    "iterate_map",
    "integrate_variational",
    "estimate_period",
    "estimate_rotation_number",
    "default_divergence_bound",
]


@dataclass(frozen=True)
class Observable:
    """Scalar observable g used for harmonic averaging.

    kind 0: scale * x[index] + offset
    kind 1: scale * cos(x[index]) + offset
    kind 2: exp(2*pi*i * x[index])   (complex, unit modulus)
    """

    kind: int = 0
    index: int = 0
    scale: float = 1.0
    offset: float = 0.0
    label: str = ""

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        re, im = _k_observe(self.kind, self.index, self.scale, self.offset, x)
        if self.kind == 2:
            return complex(re, im)
        return re


@dataclass(frozen=True)
class SystemDef:
    """A continuous flow or discrete map registered with the compiled engine.

    `vector_field` maps a state to its time derivative (continuous) or to its
    image under one application of the map (discrete); `jacobian` is its
    analytic derivative.  Both are plain-Python callables backed by the same
    compiled kernels the integrator uses.  All fields are read-only after
    construction.
    """

    name: str
    kind: str  # "continuous" | "discrete"
    dim: int
    vector_field: Callable[[np.ndarray], np.ndarray]
    jacobian: Callable[[np.ndarray], np.ndarray]
    params: dict
    observable_default: Observable
    omega0_default: Optional[float]
    state_names: tuple
    kernel_id: int
    param_vector: np.ndarray
    angle_index: int = 0  # lifted coordinate for rotation numbers (maps)

    def __post_init__(self):
        if self.kind not in ("continuous", "discrete"):
            raise ValueError(f"unknown system kind {self.kind!r}")


def make_system(name, kind, dim, kernel_id, param_vector, params,
                observable, omega0=None, state_names=None, angle_index=0):
    """Build a SystemDef whose callables close over the compiled kernels."""
    pvec = np.asarray(param_vector, dtype=float)
    if state_names is None:
        state_names = tuple(f"x{i}" for i in range(dim))

    if kind == "continuous":
        def vector_field(x, _mid=kernel_id, _p=pvec, _n=dim):
            out = np.empty(_n)
            _k_rhs(_mid, np.asarray(x, dtype=float), _p, out)
            return out

        def jacobian(x, _mid=kernel_id, _p=pvec, _n=dim):
            out = np.empty((_n, _n))
            _k_jac(_mid, np.asarray(x, dtype=float), _p, out)
            return out
    else:
        def vector_field(x, _mid=kernel_id, _p=pvec, _n=dim):
            out = np.empty(_n)
            _k_map_step(_mid, np.asarray(x, dtype=float), _p, out)
            return out

        def jacobian(x, _mid=kernel_id, _p=pvec, _n=dim):
            out = np.empty((_n, _n))
            _k_map_jac(_mid, np.asarray(x, dtype=float), _p, out)
            return out

    return SystemDef(name=name, kind=kind, dim=dim, vector_field=vector_field,
                     jacobian=jacobian, params=dict(params),
                     observable_default=observable, omega0_default=omega0,
                     state_names=tuple(state_names), kernel_id=kernel_id,
                     param_vector=pvec, angle_index=angle_index)


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    states: np.ndarray  # (len(times), dim)
    escaped: bool = False


@dataclass(frozen=True)
class FundamentalMatrix:
    horizon: float
    matrix: np.ndarray


def default_divergence_bound(x0):
    """Escape threshold used when none is supplied."""
    return 1e6 * float(np.max(np.abs(x0))) + 1e6


def _check_continuous(system):
    if system.kind != "continuous":
        raise ValueError(f"{system.name} is not a continuous-time system")


def _check_discrete(system):
    if system.kind != "discrete":
        raise ValueError(f"{system.name} is not a discrete-time system")


def _as_state(system, x0):
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (system.dim,):
        raise ValueError(
            f"state for {system.name} must have shape ({system.dim},), "
            f"got {x0.shape}")
    return x0


def _raise_on_failure(status, t_reached, name):
    if status == 2:
        raise IntegrationError(
            f"step size underflow integrating {name} at t={t_reached:.6g}",
            t_reached=t_reached)
    if status == 3:
        raise IntegrationError(
            f"integration of {name} aborted (step budget or non-finite "
            f"state) at t={t_reached:.6g}", t_reached=t_reached)


def integrate_flow(system, x0, t_final, rel_tol=1e-6, dense=200,
                   divergence_bound=None):
    """Integrate the flow over [0, t_final], returning states at the
    requested sample times.

    `dense` is either the number of uniform intervals (int) or an ascending
    array of sample times inside [0, t_final].  If the trajectory exceeds the
    divergence bound it is truncated at the escape step and flagged.
    """
    _check_continuous(system)
    x0 = _as_state(system, x0)
    t_final = float(t_final)
    if not t_final > 0.0:
        raise ValueError("t_final must be positive")
    if np.isscalar(dense):
        ts = np.linspace(0.0, t_final, int(dense) + 1)
    else:
        ts = np.asarray(dense, dtype=float)
        if ts.size and (np.any(np.diff(ts) < 0) or ts[0] < 0.0
                        or ts[-1] > t_final * (1 + 1e-12)):
            raise ValueError("sample times must ascend within [0, t_final]")
    if divergence_bound is None:
        divergence_bound = default_divergence_bound(x0)

    y = x0.copy()
    samples = np.empty((ts.size, system.dim))
    status, t_reached, n_done, _, _, _, _ = _engine.drive(
        0, system.dim, system.kernel_id, system.param_vector, y,
        0.0, t_final, float(rel_tol), float(divergence_bound), 0.0,
        ts, samples, 0, 0.0, 1.0, 0, 0, 1.0, 0.0, 0.0, MAX_STEPS)
    _raise_on_failure(status, t_reached, system.name)
    if status == 1:
        return Trajectory(times=ts[:n_done], states=samples[:n_done],
                          escaped=True)
    return Trajectory(times=ts, states=samples, escaped=False)


def flow_endpoint(system, x0, t_final, rel_tol=1e-6, divergence_bound=None,
                  h0=0.0):
    """State at t_final only (no dense storage).  Internal workhorse."""
    _check_continuous(system)
    x0 = _as_state(system, x0)
    if divergence_bound is None:
        divergence_bound = default_divergence_bound(x0)
    y = x0.copy()
    empty = np.empty(0)
    empty_out = np.empty((0, system.dim))
    status, t_reached, _, _, _, _, _ = _engine.drive(
        0, system.dim, system.kernel_id, system.param_vector, y,
        0.0, float(t_final), float(rel_tol), float(divergence_bound), h0,
        empty, empty_out, 0, 0.0, 1.0, 0, 0, 1.0, 0.0, 0.0, MAX_STEPS)
    _raise_on_failure(status, t_reached, system.name)
    return y, status == 1


def iterate_map(system, x0, n_steps):
    """Iterate a discrete map n_steps times, returning the full orbit."""
    _check_discrete(system)
    x0 = _as_state(system, x0)
    n_steps = int(n_steps)
    if n_steps < 0:
        raise ValueError("n_steps must be nonnegative")
    orbit = np.empty((n_steps + 1, system.dim))
    status, done = _engine.map_orbit(
        system.kernel_id, system.param_vector, x0, n_steps, orbit)
    if status != 0:
        raise IterationError(
            f"{system.name} produced a non-finite state at step {done}",
            step=done)
    return Trajectory(times=np.arange(n_steps + 1, dtype=float),
                      states=orbit, escaped=False)


def integrate_variational(system, x0, horizon, rel_tol=1e-9,
                          divergence_bound=None):
    """Fundamental matrix of the linearized dynamics along the orbit of x0.

    Continuous systems integrate dM/dt = J(x(t)) M jointly with the state
    under the same adaptive error control; discrete systems form the ordered
    product of Jacobians (new factors on the left).  For long horizons on
    expanding systems use the renormalized routines in `lyapunov` instead:
    the raw matrix overflows.
    """
    x0 = _as_state(system, x0)
    if system.kind == "discrete":
        n = int(horizon)
        m, _, status = _engine.map_plain_product(
            system.kernel_id, system.param_vector, x0, n)
        if status != 0:
            raise IterationError(
                f"{system.name} produced a non-finite state during tangent "
                f"propagation")
        return FundamentalMatrix(horizon=n, matrix=m)

    if divergence_bound is None:
        divergence_bound = default_divergence_bound(x0)
    dim = system.dim
    y = np.zeros(dim + dim * dim)
    y[:dim] = x0
    for i in range(dim):
        y[dim + i * dim + i] = 1.0
    empty = np.empty(0)
    empty_out = np.empty((0, y.size))
    status, t_reached, _, _, _, _, _ = _engine.drive(
        1, dim, system.kernel_id, system.param_vector, y,
        0.0, float(horizon), float(rel_tol), float(divergence_bound), 0.0,
        empty, empty_out, 0, 0.0, 1.0, 0, 0, 1.0, 0.0, 0.0, MAX_STEPS)
    _raise_on_failure(status, t_reached, system.name)
    if status == 1:
        raise IntegrationError(
            f"orbit of {system.name} escaped during tangent propagation at "
            f"t={t_reached:.6g}", t_reached=t_reached)
    m = y[dim:].reshape(dim, dim).copy()
    return FundamentalMatrix(horizon=float(horizon), matrix=m)


# ---------------------------------------------------------------------------
# Period and rotation-number estimation.

def _local_maxima(sig):
    left = sig[1:-1] >= sig[:-2]
    right = sig[1:-1] > sig[2:]
    return np.nonzero(left & right)[0] + 1


def _refine_maxima(ts, sig, idx):
    """Quadratic refinement of sample-resolution maxima locations."""
    out = np.empty(idx.size)
    dt = ts[1] - ts[0]
    for k, i in enumerate(idx):
        a, b, c = sig[i - 1], sig[i], sig[i + 1]
        denom = a - 2.0 * b + c
        shift = 0.0 if denom == 0.0 else 0.5 * (a - c) / denom
        shift = min(0.5, max(-0.5, shift))
        out[k] = ts[i] + shift * dt
    return out


def _pearson_at_lag(sig, lag):
    a = sig[:-lag] if lag > 0 else sig
    b = sig[lag:]
    a = a - a.mean()
    b = b - b.mean()
    denom = math.sqrt(float(a @ a) * float(b @ b))
    if denom == 0.0:
        return 0.0
    return float(a @ b) / denom


def estimate_period(system, x_seed, transient, *, period_hint=None,
                    t_observe=None, samples_per_cycle=2048, n_cycles=8,
                    rel_tol=1e-8, observable=None, min_autocorr=0.99):
    """Estimate the period T0 and angular frequency 2*pi/T0 of the settled
    orbit of x_seed.

    After discarding `transient`, the default observable is recorded on a
    uniform grid.  Simple cycles are timed by the mean interval between
    quadratically refined maxima; multi-maximum (bursting) waveforms fall
    back to full-waveform matching: the lag maximizing the normalized
    autocorrelation, refined over as many cycles as the record allows.
    Raises NotPeriodicError when no lag correlates above `min_autocorr`.

    `period_hint` / `t_observe` only set the window and sampling scales;
    the returned value does not otherwise depend on the hint.
    """
    _check_continuous(system)
    if observable is None:
        observable = system.observable_default
    if t_observe is None:
        if period_hint is None:
            raise ValueError("need period_hint or t_observe to size the "
                             "observation window")
        t_observe = n_cycles * period_hint
    if period_hint is None:
        period_hint = t_observe / n_cycles

    x0, escaped = flow_endpoint(system, x_seed, transient, rel_tol=rel_tol)
    if escaped:
        raise NotPeriodicError(f"{system.name} escaped during the transient")

    n_samp = int(round(t_observe / period_hint * samples_per_cycle))
    ts = np.linspace(0.0, t_observe, n_samp + 1)
    traj = integrate_flow(system, x0, t_observe, rel_tol=rel_tol, dense=ts)
    if traj.escaped:
        raise NotPeriodicError(f"{system.name} escaped while recording")
    sig = np.array([observable(s) for s in traj.states], dtype=float) \
        if observable.kind == 1 else \
        observable.scale * traj.states[:, observable.index] + observable.offset

    idx = _local_maxima(sig)
    t0 = None
    if idx.size >= 4:
        tmax = _refine_maxima(ts, sig, idx)
        ivals = np.diff(tmax)
        if ivals.std() / ivals.mean() < 1e-4:
            t0 = (tmax[-1] - tmax[0]) / (tmax.size - 1)

    if t0 is None:
        t0 = _autocorr_period(sig, ts, min_autocorr, system.name)

    lag = int(round(t0 / (ts[1] - ts[0])))
    if lag < 1 or lag > sig.size - 8:
        raise NotPeriodicError(
            f"no periodic structure detected for {system.name}")
    if _pearson_at_lag(sig, lag) < min_autocorr:
        raise NotPeriodicError(
            f"autocorrelation peak below {min_autocorr} for {system.name}")
    return t0, 2.0 * math.pi / t0


def _autocorr_period(sig, ts, min_autocorr, name):
    dt = ts[1] - ts[0]
    s0 = sig - sig.mean()
    n = s0.size
    nfft = 1 << int(math.ceil(math.log2(2 * n)))
    spec = np.fft.rfft(s0, nfft)
    r = np.fft.irfft(spec * np.conj(spec), nfft)[:n].real
    if r[0] <= 0.0:
        raise NotPeriodicError(f"flat observable record for {name}")
    counts = n - np.arange(n)
    c = (r / counts) / (r[0] / n)  # unbiased, 1.0 at perfectly matching lags

    jmax = n // 2
    peaks = []
    for j in range(2, jmax):
        if c[j] >= c[j - 1] and c[j] > c[j + 1] and c[j] >= min_autocorr:
            peaks.append(j)
    # drop side peaks that merely ride the zero-lag lobe
    peaks = [j for j in peaks if c[j: j + 2].min() < 2.0]
    if not peaks:
        raise NotPeriodicError(
            f"autocorrelation peak below {min_autocorr} for {name}")
    j1 = peaks[0]

    # refine over the largest usable multiple of the candidate lag
    k = max(1, (n - n // 4) // j1 - 1)
    target = k * j1
    if target > n - n // 8:
        k = 1
        target = j1
    w = max(4, j1 // 4)
    lo = max(1, target - w)
    hi = min(n - 4, target + w)
    best_j, best_r = lo, -2.0
    for j in range(lo, hi + 1):
        rj = _pearson_at_lag(sig, j)
        if rj > best_r:
            best_r, best_j = rj, j
    rm = _pearson_at_lag(sig, best_j - 1)
    rp = _pearson_at_lag(sig, best_j + 1)
    denom = rm - 2.0 * best_r + rp
    shift = 0.0 if denom == 0.0 else 0.5 * (rm - rp) / denom
    shift = min(0.5, max(-0.5, shift))
    return (best_j + shift) * dt / k


def estimate_rotation_number(system, x0, n_iters=10_000_000,
                             n_transient=10_000):
    """Rotation number of a circle-attractor map: the mean lifted angular
    displacement per iterate after a transient."""
    _check_discrete(system)
    x0 = _as_state(system, x0)
    if n_iters < 10_000:
        raise ValueError("n_iters must be at least 1e4 for a stable average")
    nu, status = _engine.map_rotation(
        system.kernel_id, system.param_vector, system.angle_index, x0,
        int(n_transient), int(n_iters))
    if status != 0:
        raise IterationError(
            f"{system.name} produced a non-finite state while accumulating "
            f"the rotation number")
    return nu
