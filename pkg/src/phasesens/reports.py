"""Delimited-text output for every analysis product, plus the key=value
config-file reader used by the command line.

All numbers are written with 9 significant digits; flags as 0/1.  Comment
lines start with '#'.
"""

import numpy as np


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".9g")


def _grid_header(kind, model, grid, extra=()):
    ax0, ax1 = grid.axes
    lines = [f"# {kind} {model}",
             f"# axes: {ax0},{ax1}",
             f"# section: " + " ".join(
                 f"{i}={_fmt(v)}" for i, v in enumerate(grid.base)
                 if i not in grid.axes)]
    lines.extend(extra)
    return lines


def write_phase_field(path, model, field):
    """Grid CSV: i,j,x1,x2,theta,converged with section metadata."""
    grid = field.grid
    a0 = grid.axis_values(0)
    a1 = grid.axis_values(1)
    with open(path, "w", encoding="utf-8") as fh:
        for line in _grid_header("phase-field", model, grid):
            fh.write(line + "\n")
        fh.write("i,j,x1,x2,theta,converged\n")
        for i in range(a0.size):
            for j in range(a1.size):
                fh.write(",".join([
                    str(i), str(j), _fmt(a0[i]), _fmt(a1[j]),
                    _fmt(field.theta[i, j]),
                    _fmt(field.converged[i, j])]) + "\n")


def write_ftle_field(path, model, field):
    """Grid CSV: i,j,x1,x2,ftle,converged with section metadata."""
    grid = field.grid
    a0 = grid.axis_values(0)
    a1 = grid.axis_values(1)
    with open(path, "w", encoding="utf-8") as fh:
        for line in _grid_header("ftle-field", model, grid):
            fh.write(line + "\n")
        fh.write("i,j,x1,x2,ftle,converged\n")
        for i in range(a0.size):
            for j in range(a1.size):
                fh.write(",".join([
                    str(i), str(j), _fmt(a0[i]), _fmt(a1[j]),
                    _fmt(field.values[i, j]),
                    _fmt(field.converged[i, j])]) + "\n")


def write_sensitivity_curve(path, model, curve):
    """Curve CSV: epsilon,mean_f,n_valid plus fit metadata comments."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# sensitivity {model}\n")
        fh.write("epsilon,mean_f,n_valid\n")
        for s in curve.samples:
            fh.write(f"{_fmt(s.epsilon)},{_fmt(s.mean_f)},{s.n_valid}\n")
        fh.write(f"# alpha={_fmt(curve.alpha)}\n")
        fh.write(f"# beta={_fmt(curve.beta)}\n")
        fh.write(f"# window={_fmt(curve.fit_window[0])}:"
                 f"{_fmt(curve.fit_window[1])}\n")
        fh.write(f"# residual={_fmt(curve.fit_residual)}\n")
        if curve.warning:
            fh.write(f"# warning={curve.warning}\n")


def write_prc(path, model, curve):
    """PRC CSV: theta,Z,converged."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# prc {model} e=" + " ".join(
            _fmt(v) for v in curve.perturbation) + "\n")
        fh.write("theta,Z,converged\n")
        for th, z, ok in zip(curve.thetas, curve.responses, curve.converged):
            fh.write(f"{_fmt(th)},{_fmt(z)},{_fmt(ok)}\n")


def write_box_report(path, model, report):
    """Box-count CSV: d,N plus the fitted dimension."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# box-dimension {model}\n")
        fh.write("d,N\n")
        for d, n in zip(report.scales, report.counts):
            fh.write(f"{_fmt(d)},{n}\n")
        fh.write(f"# dimension={_fmt(report.dimension)}\n")
        fh.write(f"# window={_fmt(report.window[0])}:"
                 f"{_fmt(report.window[1])}\n")
        fh.write(f"# residual={_fmt(report.fit_residual)}\n")


def write_network_report(path, report):
    """Per-pulse statistics rows plus an overall summary row."""
    cfg = report.config
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# network {cfg.model} n_neurons={cfg.n_neurons} "
                 f"seed={cfg.seed} sigma_frac={_fmt(cfg.noise_sigma_fraction)}"
                 f" v_range={_fmt(report.v_range)}\n")
        fh.write("pulse_size,mean_error,max_error,"
                 "frac_gt_1e-5,frac_gt_1e-4,frac_gt_1e-3,n_valid,"
                 "n_excluded\n")
        for r in report.per_pulse:
            fh.write(",".join([
                _fmt(r.pulse_size), _fmt(r.mean_error), _fmt(r.max_error),
                _fmt(r.frac_gt_1e5), _fmt(r.frac_gt_1e4),
                _fmt(r.frac_gt_1e3), str(r.n_valid), str(r.n_excluded)])
                + "\n")
        fh.write(f"overall,{_fmt(report.overall_mean)},"
                 f"{_fmt(report.overall_max)},,,,,\n")
        for w in report.warnings:
            fh.write(f"# warning={w}\n")


def read_config(path):
    """Parse a plain key=value config file (UTF-8, '#' comments)."""
    out = {}
    with open(path, "r", encoding="utf-8") as fh:
        for ln, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{ln}: expected key = value")
            key, value = line.split("=", 1)
            out[key.strip()] = value.strip()
    return out
