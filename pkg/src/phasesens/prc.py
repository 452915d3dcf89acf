"""Phase response curves and box-counting dimension of sampled curves.

A phase response curve records the asymptotic-phase shift caused by an
impulsive state perturbation applied at each point of the attracting
cycle.  When the phase function has fractal level sets the curve's graph
is itself fractal; the box-counting estimator quantifies that.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import FitFailureError
from .models import cycle_states
from . import phase as _phase

TWO_PI = 2.0 * math.pi

DEFAULT_N_THETA = 4096
DEFAULT_SCALES = tuple(0.5 ** k for k in range(3, 13))  # 1/8 .. 1/4096
MIN_SCALES_FOR_FIT = 4
MIN_SAMPLES_PER_BOX = 4  # smallest scale must be >= this many grid steps


def wrap_to_pi(angle):
    """Reduce angles to the principal branch (-pi, pi]."""
    return np.pi - np.mod(np.pi - np.asarray(angle, dtype=float), TWO_PI)


@dataclass(frozen=True)
class PRCCurve:
    """Sampled phase response curve.

    `thetas` is the strictly increasing on-cycle phase grid in [0, 2*pi);
    `responses` holds the phase shifts reduced to (-pi, pi]; nodes whose
    perturbed phase failed to converge are flagged False in `converged`
    (their response value is meaningless and treated as a gap).
    """
    thetas: np.ndarray
    responses: np.ndarray
    converged: np.ndarray
    perturbation: np.ndarray
    model: str

    def __post_init__(self):
        if not (len(self.thetas) == len(self.responses)
                == len(self.converged)):
            raise ValueError("mismatched curve arrays")
        if np.any(np.diff(self.thetas) <= 0):
            raise ValueError("thetas must be strictly increasing")

    def restricted(self, theta_lo, theta_hi):
        """Sub-curve with thetas inside [theta_lo, theta_hi]."""
        sel = (self.thetas >= theta_lo) & (self.thetas <= theta_hi)
        if not sel.any():
            raise ValueError("empty theta range")
        return PRCCurve(thetas=self.thetas[sel],
                        responses=self.responses[sel],
                        converged=self.converged[sel],
                        perturbation=self.perturbation, model=self.model)


@dataclass(frozen=True)
class BoxCountReport:
    """Box-counting result for a curve graph normalized to the unit square.

    `scales` are the box sizes used (decreasing), `counts` the number of
    occupied boxes per scale, `dimension` the fitted slope of ln N versus
    ln(1/d) over `window` (a (d_min, d_max) pair)."""
    scales: np.ndarray
    counts: np.ndarray
    dimension: float
    window: tuple
    fit_residual: float


def prc_curve(entry, e, n_theta=DEFAULT_N_THETA, T=None, workers=1):
    """Phase response curve of a continuous catalog entry.

    For each phase on a uniform n_theta grid over [0, 2*pi), perturbs the
    on-cycle state by the vector e and records the geodesically reduced
    difference between the perturbed asymptotic phase and the on-cycle
    phase.  Non-converged phase evaluations become gaps.
    """
    if entry.kind != "continuous":
        raise ValueError("phase response curves need a continuous system")
    n_theta = int(n_theta)
    if n_theta < 64:
        raise ValueError("n_theta must be at least 64")
    e = np.asarray(e, dtype=float)
    if e.shape != (entry.dim,):
        raise ValueError(f"perturbation must have shape ({entry.dim},)")

    thetas = np.arange(n_theta) * (TWO_PI / n_theta)
    base = cycle_states(entry, thetas)
    theta_hat, _, conv = _phase.phase_many(entry, base + e, T=T,
                                           workers=workers)
    z = wrap_to_pi(theta_hat - thetas)
    return PRCCurve(thetas=thetas, responses=z, converged=conv,
                    perturbation=e, model=entry.name)


def _occupied(x, y, d):
    """Number of size-d boxes covering the sampled graph (unit square).

    Counted column-wise: within each x-column the graph spans the vertical
    interval between the sampled minimum and maximum, so the column
    contributes every box row that interval meets.  This resolves the
    vertical extent of oscillations finer than the sample spacing, which
    pure point counting would undercount."""
    n = int(round(1.0 / d))
    ix = np.minimum((x / d).astype(np.int64), n - 1)
    # x is sorted, so columns are contiguous runs
    _, starts = np.unique(ix, return_index=True)
    lo = np.minimum.reduceat(y, starts)
    hi = np.maximum.reduceat(y, starts)
    row_lo = np.minimum((lo / d).astype(np.int64), n - 1)
    row_hi = np.minimum((hi / d).astype(np.int64), n - 1)
    return int((row_hi - row_lo + 1).sum())


def box_counting_dimension(curve, scales=None, fit_window=None):
    """Box-counting dimension of the (theta, Z) graph.

    The converged samples are affinely normalized to the unit square;
    occupied-box counts are taken at each scale and the dimension is the
    least-squares slope of ln N versus ln(1/d).  Scales finer than the
    sampling can resolve (fewer than MIN_SAMPLES_PER_BOX grid steps per
    box) are dropped; fewer than four usable scales is an error.
    """
    scales = np.asarray(DEFAULT_SCALES if scales is None else scales,
                        dtype=float)
    scales = np.sort(scales)[::-1]
    if np.any(scales <= 0) or np.any(scales > 1):
        raise ValueError("scales must lie in (0, 1]")

    ok = np.asarray(curve.converged, dtype=bool)
    x = np.asarray(curve.thetas, dtype=float)[ok]
    y = np.asarray(curve.responses, dtype=float)[ok]
    if x.size < 16:
        raise FitFailureError("too few converged samples for box counting")
    spacing = np.diff(np.asarray(curve.thetas, dtype=float)).min()
    span_x = x.max() - x.min()
    x = (x - x.min()) / span_x
    span_y = y.max() - y.min()
    y = (y - y.min()) / span_y if span_y > 0 else np.zeros_like(y)

    resolvable = scales >= MIN_SAMPLES_PER_BOX * (spacing / span_x)
    scales = scales[resolvable]
    if scales.size < MIN_SCALES_FOR_FIT:
        raise FitFailureError(
            f"only {scales.size} scales resolvable by the sampling "
            f"({MIN_SCALES_FOR_FIT} required)")

    counts = np.array([_occupied(x, y, d) for d in scales], dtype=np.int64)

    if fit_window is not None:
        lo, hi = min(fit_window), max(fit_window)
        sel = (scales >= lo) & (scales <= hi)
        if sel.sum() < MIN_SCALES_FOR_FIT:
            raise FitFailureError("fit window keeps fewer than 4 scales")
    else:
        sel = np.ones(scales.size, dtype=bool)
    lx = np.log(1.0 / scales[sel])
    ly = np.log(counts[sel])
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = float(np.sqrt(np.mean((ly - (slope * lx + intercept)) ** 2)))
    return BoxCountReport(scales=scales, counts=counts,
                          dimension=float(slope),
                          window=(float(scales[sel].min()),
                                  float(scales[sel].max())),
                          fit_residual=resid)
