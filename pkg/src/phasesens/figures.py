"""Figure rendering for the command-line report path.

Each writer saves a PNG next to the delimited output.  The Agg backend is
forced so rendering works headless.
"""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def _save(fig, path):
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)


def plot_phase_field(field, path, title=""):
    """Phase on a planar section, cyclic colormap, phaseless nodes black."""
    grid = field.grid
    vals = np.ma.masked_where(~field.converged, field.theta)
    fig, ax = plt.subplots(figsize=(6, 5))
    cmap = plt.get_cmap("twilight").copy()
    cmap.set_bad("black")
    im = ax.pcolormesh(grid.axis_values(0), grid.axis_values(1), vals.T,
                       cmap=cmap, vmin=0.0, vmax=2.0 * np.pi,
                       shading="nearest")
    fig.colorbar(im, ax=ax, label="phase")
    ax.set_xlabel(f"state[{grid.axes[0]}]")
    ax.set_ylabel(f"state[{grid.axes[1]}]")
    ax.set_title(title)
    _save(fig, path)


def plot_ftle_field(field, path, title="", threshold=None):
    grid = field.grid
    vals = np.ma.masked_where(~field.converged, field.values)
    fig, ax = plt.subplots(figsize=(6, 5))
    im = ax.pcolormesh(grid.axis_values(0), grid.axis_values(1), vals.T,
                       cmap="inferno", shading="nearest")
    fig.colorbar(im, ax=ax, label="largest exponent")
    if threshold is not None:
        ax.contour(grid.axis_values(0), grid.axis_values(1), vals.T,
                   levels=[threshold], colors="cyan", linewidths=0.8)
    ax.set_xlabel(f"state[{grid.axes[0]}]")
    ax.set_ylabel(f"state[{grid.axes[1]}]")
    ax.set_title(title)
    _save(fig, path)


def plot_sensitivity_curve(curve, path, title=""):
    """Log-log curve with the fitted slope drawn over its window."""
    eps = curve.epsilons
    vals = curve.values
    fig, ax = plt.subplots(figsize=(6, 4.5))
    ax.loglog(eps, vals, "o-", ms=4, label="measured")
    lo, hi = curve.fit_window
    sel = (eps >= lo) & (eps <= hi) & (vals > 0)
    if sel.any():
        anchor = np.log(vals[sel]).mean() \
            - curve.alpha * np.log(eps[sel]).mean()
        xs = np.array([lo, hi])
        ax.loglog(xs, np.exp(anchor) * xs ** curve.alpha, "r--",
                  label=f"slope {curve.alpha:.3f}")
    ax.set_xlabel("perturbation size")
    ax.set_ylabel("curve value")
    ax.legend()
    ax.set_title(title or f"beta = {curve.beta:.3f}")
    _save(fig, path)


def plot_prc(curve, path, title=""):
    fig, ax = plt.subplots(figsize=(7, 4))
    z = np.ma.masked_where(~curve.converged, curve.responses)
    ax.plot(curve.thetas, z, ".", ms=1.5)
    ax.set_xlabel("on-cycle phase")
    ax.set_ylabel("phase shift")
    ax.set_xlim(0.0, 2.0 * np.pi)
    ax.set_title(title)
    _save(fig, path)


def plot_box_report(report, path, title=""):
    fig, ax = plt.subplots(figsize=(5.5, 4.5))
    ax.loglog(1.0 / report.scales, report.counts, "s-", ms=4)
    ax.set_xlabel("1 / box size")
    ax.set_ylabel("occupied boxes")
    ax.set_title(title or f"dimension = {report.dimension:.3f}")
    _save(fig, path)


def plot_network_report(report, path, title=""):
    sizes = [r.pulse_size for r in report.per_pulse]
    fig, ax = plt.subplots(figsize=(6, 4.5))
    ax.loglog(sizes, [r.mean_error for r in report.per_pulse], "o-",
              label="mean error")
    ax.loglog(sizes, [r.max_error for r in report.per_pulse], "s--",
              label="max error")
    ax.set_xlabel("pulse size")
    ax.set_ylabel("phase error")
    ax.legend()
    ax.set_title(title or report.config.model)
    _save(fig, path)
