"""Finite-time Lyapunov exponents, pointwise and on grids.

The fundamental matrix over a finite horizon is propagated with periodic
QR re-orthonormalization so its stretching factors can be accumulated in
log space without overflow; the exponents are the accumulated log
diagonals divided by the horizon, which for the product factorization
equals the log singular values of the horizon map wherever the splitting
is resolved.  The largest exponent flags regions of strong trajectory
separation, where phase computations lose accuracy.
"""

from dataclasses import dataclass

import numpy as np

from . import _engine
from .dynamics import default_divergence_bound, MAX_STEPS
from .errors import IntegrationError, IterationError
from .phase import GridSpec, apply_workers

DEFAULT_QR_PER_CYCLE = 4
DEFAULT_QR_EVERY_STEPS = 5


@dataclass(frozen=True)
class FTLEResult:
    """Finite-time exponents at one state, sorted descending."""
    exponents: np.ndarray
    horizon: float

    @property
    def largest(self):
        return float(self.exponents[0])


@dataclass(frozen=True)
class FTLEField:
    """Largest finite-time exponent on a grid.

    `values` has the grid shape; `converged` marks nodes whose tangent
    propagation completed without escape or integrator failure.
    """
    grid: GridSpec
    values: np.ndarray
    converged: np.ndarray


def _split_entry(entry):
    """Accept a catalog entry or a bare SystemDef."""
    if hasattr(entry, "system"):
        return entry.system, entry.rel_tol, entry.averaging_T0
    return entry, None, None


def _qr_interval(T, cycle_T0, override):
    if override is not None:
        if override <= 0:
            raise ValueError("qr_interval must be positive")
        return min(float(override), float(T))
    if cycle_T0 is not None:
        return min(float(T), cycle_T0 / DEFAULT_QR_PER_CYCLE)
    return float(T) / DEFAULT_QR_PER_CYCLE


def ftle(entry, x, T, rel_tol=None, qr_interval=None):
    """Finite-time Lyapunov exponents of the horizon-T flow map at x.

    Continuous systems integrate the variational equations jointly with
    the state, re-orthonormalizing the tangent frame at intervals no
    larger than a quarter cycle; discrete systems accumulate the Jacobian
    product with the same renormalization every few iterations.  Returns
    all exponents, descending.
    """
    system, entry_rtol, cycle_T0 = _split_entry(entry)
    x = np.asarray(x, dtype=float)
    if x.shape != (system.dim,):
        raise ValueError(f"state must have shape ({system.dim},)")
    if T <= 0:
        raise ValueError("horizon must be positive")

    if system.kind == "discrete":
        n_steps = int(round(T))
        every = DEFAULT_QR_EVERY_STEPS if qr_interval is None \
            else max(1, int(qr_interval))
        log_r, _, status = _engine.map_tangent_product(
            system.kernel_id, system.param_vector, x.copy(), n_steps, every)
        if status != 0:
            raise IterationError(
                f"{system.name} produced a non-finite state during tangent "
                f"propagation")
        exps = np.sort(log_r / n_steps)[::-1]
        return FTLEResult(exponents=exps, horizon=float(n_steps))

    rtol = rel_tol if rel_tol is not None else (entry_rtol or 1e-9)
    renorm = _qr_interval(T, cycle_T0, qr_interval)
    bound = default_divergence_bound(x)
    log_r, _, status = _engine.ftle_continuous(
        system.kernel_id, system.param_vector, x.copy(), float(T),
        renorm, float(rtol), bound, MAX_STEPS)
    if status != 0:
        raise IntegrationError(
            f"tangent propagation failed on {system.name} (status {status})")
    exps = np.sort(log_r / T)[::-1]
    return FTLEResult(exponents=exps, horizon=float(T))


def ftle_field(entry, grid, T, rel_tol=None, qr_interval=None, workers=1):
    """Largest finite-time exponent at every node of a grid.

    Nodes are independent; results are bitwise identical for any worker
    count.  Failed nodes keep their computed value but are flagged
    non-converged.
    """
    system, entry_rtol, cycle_T0 = _split_entry(entry)
    if not isinstance(grid, GridSpec):
        raise TypeError("grid must be a GridSpec")
    if T <= 0:
        raise ValueError("horizon must be positive")
    points = np.ascontiguousarray(grid.nodes(), dtype=float)
    apply_workers(workers)

    if system.kind == "discrete":
        n_steps = int(round(T))
        every = DEFAULT_QR_EVERY_STEPS if qr_interval is None \
            else max(1, int(qr_interval))
        vals, status = _engine.ftle_batch_discrete(
            system.kernel_id, system.param_vector, points, n_steps, every)
    else:
        rtol = rel_tol if rel_tol is not None else (entry_rtol or 1e-9)
        renorm = _qr_interval(T, cycle_T0, qr_interval)
        bound = 1e6 * float(np.max(np.abs(points))) + 1e6
        vals, status = _engine.ftle_batch_continuous(
            system.kernel_id, system.param_vector, points, float(T),
            renorm, float(rtol), bound, MAX_STEPS)

    shape = grid.shape
    converged = (status == 0) & np.isfinite(vals)
    return FTLEField(grid=grid, values=vals.reshape(shape),
                     converged=converged.reshape(shape))
