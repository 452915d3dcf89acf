"""Phase sensitivity analysis.

Quantifies how strongly the asymptotic phase reacts to small state
perturbations: pointwise two-point sensitivity, curves of the averaged
sensitivity versus perturbation size, log-log slope fits yielding the
scaling exponent alpha (and coefficient beta = 1 - alpha), an alternative
estimator based on exceedance sets, and centered-difference local slopes.

Phase evaluation is pluggable: every operation accepts a `phase_fn`
callable mapping an (n, N) array of states to `(theta, converged)` arrays,
which replaces the dynamical phase computation.  This lets the regression
machinery be validated against analytic stubs with known exponents.
"""

from dataclasses import dataclass

import numpy as np

from .errors import FitFailureError
from . import phase as _phase

TWO_PI = 2.0 * np.pi

DEFAULT_DELTA_THETA = 0.5
DEFAULT_WINDOW_SIZE = 5
DEFAULT_MIN_VALID_FRACTION = 0.9


def geodesic_distance(theta, theta_p):
    """Shortest angular distance between two phases, in [0, pi].

    Accepts scalars or arrays (broadcast elementwise).
    """
    d = np.mod(np.asarray(theta, dtype=float)
               - np.asarray(theta_p, dtype=float), TWO_PI)
    out = np.minimum(d, TWO_PI - d)
    if out.ndim == 0:
        return float(out)
    return out


def default_epsilons(length, n=12, hi_frac=1e-2, lo_frac=1e-7):
    """Log-spaced perturbation sizes from hi_frac*length down to
    lo_frac*length, strictly decreasing."""
    if length <= 0:
        raise ValueError("segment length must be positive")
    return length * np.logspace(np.log10(hi_frac), np.log10(lo_frac), int(n))


@dataclass(frozen=True)
class SensitivitySample:
    """One curve point: perturbation size, curve value, pair count.

    For sensitivity curves `mean_f` is the average two-point sensitivity
    over valid pairs; for exceedance curves it is the fraction of valid
    points whose sensitivity exceeds the threshold.
    """
    epsilon: float
    mean_f: float
    n_valid: int


@dataclass(frozen=True)
class SensitivityCurve:
    """A fitted sensitivity curve.

    `samples` are ordered by strictly decreasing epsilon.  `alpha` is the
    fitted small-epsilon log-log slope (or the exceedance-set slope for
    the alternative estimator) and `beta = 1 - alpha` always.  The fit
    used samples with epsilon inside `fit_window`; `fit_residual` is the
    RMS residual of the linear fit in log-log coordinates.  `warning`
    carries data-quality notes (zero-valued samples dropped, etc.).
    """
    samples: tuple
    alpha: float
    beta: float
    fit_window: tuple
    fit_residual: float
    warning: str = ""

    def __post_init__(self):
        eps = [s.epsilon for s in self.samples]
        if any(b >= a for a, b in zip(eps, eps[1:])):
            raise ValueError("samples must have strictly decreasing epsilon")
        if abs((1.0 - self.alpha) - self.beta) > 1e-15:
            raise ValueError("beta must equal 1 - alpha")

    @property
    def epsilons(self):
        return np.array([s.epsilon for s in self.samples])

    @property
    def values(self):
        return np.array([s.mean_f for s in self.samples])


def _resolve_phase_fn(entry, T, observable, workers, phase_fn):
    """Normalize phase evaluation to points -> (theta, converged)."""
    if phase_fn is not None:
        def call(points):
            out = phase_fn(np.asarray(points, dtype=float))
            if len(out) == 3:
                theta, _, conv = out
            else:
                theta, conv = out
            return (np.asarray(theta, dtype=float),
                    np.asarray(conv, dtype=bool))
        return call
    if entry is None:
        raise ValueError("either a catalog entry or a phase_fn is required")

    def call(points):
        theta, _, conv = _phase.phase_many(entry, points, T=T,
                                           observable=observable,
                                           workers=workers)
        return theta, conv
    return call


def two_point_sensitivity(entry, x, epsilon, e, T=None, observable=None,
                          phase_fn=None, workers=1):
    """Worst-case geodesic phase difference across the pair x +- epsilon*e.

    Evaluates the phase at x, x - epsilon*e and x + epsilon*e and returns
    the larger of the two geodesic distances to the phase at x.  Returns
    None when any of the three phases fails to converge.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    x = np.asarray(x, dtype=float)
    e = np.asarray(e, dtype=float)
    pts = np.stack([x, x - epsilon * e, x + epsilon * e])
    theta, conv = _resolve_phase_fn(entry, T, observable, workers,
                                    phase_fn)(pts)
    if not conv.all():
        return None
    return max(geodesic_distance(theta[0], theta[1]),
               geodesic_distance(theta[0], theta[2]))


def pair_table(entry, A=None, n_pt=None, e=None, eps_list=None, T=None,
               observable=None, phase_fn=None, workers=1):
    """Shared sweep: two-point sensitivities for every (point, epsilon).

    Returns (eps, f_values[n_eps, n_pt], valid[n_eps, n_pt]).  The base
    phases are computed once and reused across epsilon values, so the
    total number of phase evaluations is n_pt * (1 + 2 * len(eps_list)).
    """
    if entry is not None:
        if A is None:
            A = entry.sensitivity_set_A
        if n_pt is None:
            n_pt = entry.n_pt_default
        if e is None:
            e = entry.sensitivity_direction_e
    if A is None or n_pt is None or e is None:
        raise ValueError("A, n_pt and e are required without a catalog entry")
    eps = (default_epsilons(A.length) if eps_list is None
           else np.asarray(eps_list, dtype=float))
    if eps.size < 6:
        raise ValueError("need at least 6 epsilon values")
    if np.any(np.diff(eps) >= 0) or np.any(eps <= 0):
        raise ValueError("epsilon values must be positive, strictly "
                         "decreasing")
    n_pt = int(n_pt)
    if n_pt < 100:
        raise ValueError("n_pt must be at least 100")
    e = np.asarray(e, dtype=float)
    if abs(np.linalg.norm(e) - 1.0) > 1e-9:
        raise ValueError("direction e must have unit norm")

    evaluate = _resolve_phase_fn(entry, T, observable, workers, phase_fn)
    base = A.points(n_pt)
    theta0, conv0 = evaluate(base)

    f_tab = np.empty((eps.size, n_pt))
    ok_tab = np.empty((eps.size, n_pt), dtype=bool)
    for i, epsilon in enumerate(eps):
        shifted = np.vstack([base - epsilon * e, base + epsilon * e])
        theta_s, conv_s = evaluate(shifted)
        d_minus = geodesic_distance(theta0, theta_s[:n_pt])
        d_plus = geodesic_distance(theta0, theta_s[n_pt:])
        f_tab[i] = np.maximum(d_minus, d_plus)
        ok_tab[i] = conv0 & conv_s[:n_pt] & conv_s[n_pt:]
    return eps, f_tab, ok_tab


def _fit_loglog(eps, vals, usable, fit_window, window_size, what):
    """Least-squares slope of ln(vals) vs ln(eps) over the fit window.

    Default window: the `window_size` smallest usable epsilons.  Returns
    (slope, (eps_min, eps_max), rms_residual).
    """
    if fit_window is not None:
        lo, hi = min(fit_window), max(fit_window)
        sel = usable & (eps >= lo) & (eps <= hi)
    else:
        idx = np.flatnonzero(usable)
        idx = idx[np.argsort(eps[idx])][:window_size]
        sel = np.zeros_like(usable)
        sel[idx] = True
    if sel.sum() < 3:
        raise FitFailureError(
            f"only {int(sel.sum())} usable samples for the {what} fit "
            f"(3 required)")
    lx = np.log(eps[sel])
    ly = np.log(vals[sel])
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = float(np.sqrt(np.mean((ly - (slope * lx + intercept)) ** 2)))
    return float(slope), (float(eps[sel].min()), float(eps[sel].max())), resid


def sensitivity_curve(entry, A=None, n_pt=None, e=None, eps_list=None, *,
                      T=None, observable=None, phase_fn=None, workers=1,
                      fit_window=None, window_size=DEFAULT_WINDOW_SIZE,
                      min_valid_fraction=DEFAULT_MIN_VALID_FRACTION,
                      table=None):
    """Averaged two-point sensitivity versus perturbation size, with the
    small-epsilon scaling exponent.

    Places n_pt equally spaced points on the segment A, computes the mean
    valid two-point sensitivity at each epsilon, and fits alpha as the
    least-squares slope of ln(mean) vs ln(epsilon) over the fit window
    (by default the `window_size` smallest epsilons retaining at least
    `min_valid_fraction` converged pairs).  beta = 1 - alpha.

    `table` reuses a sweep from pair_table(...) so this estimator and the
    exceedance estimator can share one set of phase evaluations.
    """
    eps, f_tab, ok_tab = (pair_table(entry, A, n_pt, e, eps_list, T,
                                     observable, phase_fn, workers)
                          if table is None else table)
    n_pt_actual = f_tab.shape[1]
    n_valid = ok_tab.sum(axis=1)
    mean_f = np.array([f[ok].mean() if ok.any() else np.nan
                       for f, ok in zip(f_tab, ok_tab)])

    frac = n_valid / n_pt_actual
    positive = np.isfinite(mean_f) & (mean_f > 0)
    usable = (frac >= min_valid_fraction) & positive
    warning = ""
    n_zero = int(((frac >= min_valid_fraction) & ~positive).sum())
    if n_zero:
        warning = (f"{n_zero} sample(s) with zero mean sensitivity dropped "
                   f"from the fit")
    alpha, window, resid = _fit_loglog(eps, mean_f, usable, fit_window,
                                       window_size, "sensitivity")
    samples = tuple(SensitivitySample(float(ep), float(mf), int(nv))
                    for ep, mf, nv in zip(eps, mean_f, n_valid))
    return SensitivityCurve(samples=samples, alpha=alpha, beta=1.0 - alpha,
                            fit_window=window, fit_residual=resid,
                            warning=warning)


def mdtheta_curve(entry, A=None, n_pt=None, e=None, eps_list=None, *,
                  delta_theta=DEFAULT_DELTA_THETA, T=None, observable=None,
                  phase_fn=None, workers=1, fit_window=None,
                  window_size=DEFAULT_WINDOW_SIZE,
                  min_valid_fraction=DEFAULT_MIN_VALID_FRACTION,
                  table=None):
    """Exceedance-set estimator of the scaling exponent.

    For each epsilon, measures the fraction of valid sample points whose
    two-point sensitivity exceeds `delta_theta`; the log-log slope of that
    fraction versus epsilon estimates codimension (N - D) of the
    high-sensitivity set, reported as alpha with beta = 1 - alpha.
    Epsilons with zero exceedance cannot enter the log fit; they are
    dropped with a warning (the slope may be underestimated).

    `table` reuses a sweep from pair_table(...), sharing phase evaluations
    with the averaged estimator.
    """
    if not 0.0 < delta_theta < np.pi:
        raise ValueError("delta_theta must lie in (0, pi)")
    eps, f_tab, ok_tab = (pair_table(entry, A, n_pt, e, eps_list, T,
                                     observable, phase_fn, workers)
                          if table is None else table)
    n_pt_actual = f_tab.shape[1]
    n_valid = ok_tab.sum(axis=1)
    fraction = np.array([
        (f[ok] > delta_theta).mean() if ok.any() else np.nan
        for f, ok in zip(f_tab, ok_tab)])

    frac_valid = n_valid / n_pt_actual
    positive = np.isfinite(fraction) & (fraction > 0)
    usable = (frac_valid >= min_valid_fraction) & positive
    warning = ""
    n_zero = int(((frac_valid >= min_valid_fraction) & ~positive).sum())
    if n_zero:
        warning = (f"{n_zero} epsilon(s) with zero exceedance fraction "
                   f"dropped from the fit; slope may be underestimated")
    alpha, window, resid = _fit_loglog(eps, fraction, usable, fit_window,
                                       window_size, "exceedance")
    samples = tuple(SensitivitySample(float(ep), float(fr), int(nv))
                    for ep, fr, nv in zip(eps, fraction, n_valid))
    return SensitivityCurve(samples=samples, alpha=alpha, beta=1.0 - alpha,
                            fit_window=window, fit_residual=resid,
                            warning=warning)


def infinitesimal_coefficient(curve):
    """Local sensitivity coefficient at each interior curve sample.

    Centered finite differences of ln(value) with respect to ln(epsilon)
    give the local slope; the coefficient is one minus that slope.
    Returns a list of (epsilon, coefficient) pairs; interior samples whose
    neighbors have non-positive values are skipped.
    """
    if len(curve.samples) < 3:
        raise ValueError("need at least 3 samples")
    eps = curve.epsilons
    vals = curve.values
    out = []
    for i in range(1, eps.size - 1):
        trio = vals[i - 1:i + 2]
        if not (np.isfinite(trio).all() and (trio > 0).all()):
            continue
        slope = ((np.log(vals[i + 1]) - np.log(vals[i - 1]))
                 / (np.log(eps[i + 1]) - np.log(eps[i - 1])))
        out.append((float(eps[i]), float(1.0 - slope)))
    return out
