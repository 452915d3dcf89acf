"""Command-line front end.

Every analysis is a subcommand writing delimited text (and, with --plot,
a PNG figure next to it).  Numeric defaults for each model come from the
catalog (shown by `list-models` and in each subcommand's epilog).  A
`--config FILE` with `key = value` lines supplies defaults that explicit
flags override.

Exit codes: 0 success, 2 usage error, 3 numerical failure.
"""

import argparse
import sys

import numpy as np

from . import reports
from .dynamics import estimate_period, estimate_rotation_number
from .errors import PhasesensError
from .experiments import (DEFAULT_PULSE_FRACTIONS, ExperimentConfig,
                          run_network_experiment)
from .lyapunov import ftle_field
from .models import build_reference, catalog, lookup, model_names, \
    save_reference_points, v_range
from .phase import GridSpec, phase_field
from .prc import DEFAULT_N_THETA, box_counting_dimension, prc_curve
from .sensitivity import mdtheta_curve, sensitivity_curve

USAGE_ERROR = 2
NUMERICAL_ERROR = 3


# ---------------------------------------------------------------------------
# Small parsers for flag values.

def _parse_range(text):
    parts = text.split(":")
    if len(parts) == 1:
        v = float(parts[0])
        return v, v
    if len(parts) == 2:
        return float(parts[0]), float(parts[1])
    raise ValueError(f"expected lo:hi, got {text!r}")


def _parse_grid(text):
    parts = text.lower().split("x")
    if len(parts) != 2:
        raise ValueError(f"expected RxC, got {text!r}")
    n0, n1 = int(parts[0]), int(parts[1])
    if n0 < 1 or n1 < 1:
        raise ValueError("grid sides must be at least 1")
    return n0, n1


def _axis_index(entry, token):
    token = token.strip()
    names = entry.system.state_names
    if token in names:
        return names.index(token)
    idx = int(token)
    if not 0 <= idx < entry.dim:
        raise ValueError(f"axis {token!r} out of range for {entry.name}")
    return idx


def _parse_axes(entry, text):
    parts = text.split(",")
    if len(parts) != 2:
        raise ValueError(f"expected two axes, got {text!r}")
    i, j = (_axis_index(entry, p) for p in parts)
    if i == j:
        raise ValueError("the two axes must differ")
    return i, j


def _parse_section(entry, text, axes):
    """Fixed coordinates for a planar scan; unspecified ones come from the
    model's documented anchor state."""
    base = np.array(entry.seed_state, dtype=float)
    if text is None or text.strip().lower() == "none":
        return base
    for pair in text.split(","):
        name, _, value = pair.partition("=")
        if value.strip().lower() == "none":
            continue
        idx = _axis_index(entry, name)
        if idx in axes:
            raise ValueError(f"coordinate {name.strip()!r} is a scan axis")
        base[idx] = float(value)
    return base


def _parse_eps(text):
    parts = text.split(":")
    if len(parts) != 3:
        raise ValueError(f"expected hi:lo:n, got {text!r}")
    hi, lo, n = float(parts[0]), float(parts[1]), int(parts[2])
    if not (hi > lo > 0 and n >= 6):
        raise ValueError("need hi > lo > 0 and at least 6 values")
    return np.logspace(np.log10(hi), np.log10(lo), n)


def _parse_direction(entry, text):
    """A perturbation direction: a state name or a comma list of
    components (normalized)."""
    if "," not in text:
        e = np.zeros(entry.dim)
        e[_axis_index(entry, text)] = 1.0
        return e
    e = np.array([float(v) for v in text.split(",")], dtype=float)
    if e.shape != (entry.dim,):
        raise ValueError(f"direction needs {entry.dim} components")
    norm = np.linalg.norm(e)
    if norm == 0:
        raise ValueError("direction must be nonzero")
    return e / norm


def _default_lims(entry, axes):
    """Scan window from the bounding box of one settled cycle, inflated."""
    from .models import _settled_point  # deterministic settle
    from .dynamics import integrate_flow, iterate_map
    if entry.kind == "discrete":
        return (0.0, 1.0), (0.0, 1.0)
    x0 = _settled_point(entry, entry.rel_tol)
    traj = integrate_flow(entry.system, x0, entry.T0,
                          rel_tol=entry.rel_tol, dense=4096)
    lims = []
    for ax in axes:
        col = traj.states[:, ax]
        mid = 0.5 * (col.max() + col.min())
        half = max(0.5 * (col.max() - col.min()), 1e-6) * 1.6
        lims.append((mid - half, mid + half))
    return lims[0], lims[1]


class _Config:
    """Flag resolution: explicit CLI value, then config file, then default."""

    def __init__(self, args):
        self.values = {}
        path = getattr(args, "config", None)
        if path:
            self.values = reports.read_config(path)

    def get(self, args, key, default, cast=str):
        cli = getattr(args, key, None)
        if cli is not None:
            return cli
        if key in self.values:
            raw = self.values[key]
            return cast(raw) if cast is not None else raw
        return default


def _out_path(args, cfg, command, model):
    return cfg.get(args, "output", f"{command}_{model}.csv")


def _plot_path(out_path):
    stem = out_path[:-4] if out_path.endswith(".csv") else out_path
    return stem + ".png"


def _catalog_epilog():
    lines = ["model defaults (frequency, tolerance, horizon, scan set):"]
    for entry in sorted(catalog(), key=lambda e: e.name):
        rt = "-" if entry.rel_tol is None else f"{entry.rel_tol:g}"
        lines.append(
            f"  {entry.name:16s} omega0={entry.omega0:<12g} rtol={rt:<7s} "
            f"T={entry.horizon_T:<7g} n_pt={entry.n_pt_default}")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# Subcommand implementations.

def _cmd_list_models(args):
    for entry in sorted(catalog(), key=lambda e: e.name):
        a = entry.sensitivity_set_A
        seg = " x ".join(
            f"[{lo:g},{hi:g}]" if lo != hi else f"{{{lo:g}}}"
            for lo, hi in zip(a.lo, a.hi))
        print(f"{entry.name:16s} {entry.kind:10s} dim={entry.dim} "
              f"omega0={entry.omega0:<12g} T={entry.horizon_T:<8g} "
              f"A={seg} n_pt={entry.n_pt_default}")
    return 0


def _cmd_period(args):
    cfg = _Config(args)
    entry = lookup(args.model)
    if entry.kind == "discrete":
        n_iters = cfg.get(args, "iters", 10_000_000, int)
        nu = estimate_rotation_number(entry.system, entry.seed_state,
                                      n_iters=n_iters)
        print(f"model={entry.name} rotation_number={nu:.10g} "
              f"omega0={2.0 * np.pi * nu:.10g} "
              f"(catalog omega0={entry.omega0:g})")
        return 0
    rel_tol = cfg.get(args, "rel_tol", 1e-8, float)
    cycles = cfg.get(args, "cycles", 8, int)
    # long settle: started from the catalog anchor state, the chaotic model
    # needs a couple hundred turns before the record looks periodic
    transient = cfg.get(args, "transient_cycles", 200.0, float) * entry.T0
    T0, w0 = estimate_period(
        entry.system, entry.seed_state, transient,
        period_hint=entry.T0, t_observe=cycles * entry.T0,
        rel_tol=rel_tol, observable=entry.observable)
    print(f"model={entry.name} T0={T0:.10g} omega0={w0:.10g} "
          f"(catalog omega0={entry.omega0:g}, "
          f"rel diff {abs(w0 - entry.omega0) / entry.omega0:.2e})")
    return 0


def _make_grid(args, cfg, entry):
    axes = _parse_axes(entry, cfg.get(args, "axes", None) or "0,1")
    n0, n1 = _parse_grid(cfg.get(args, "grid", "201x201"))
    xlim = cfg.get(args, "xlim", None)
    ylim = cfg.get(args, "ylim", None)
    if xlim is None or ylim is None:
        dx, dy = _default_lims(entry, axes)
        xlim = _parse_range(xlim) if xlim is not None else dx
        ylim = _parse_range(ylim) if ylim is not None else dy
    else:
        xlim = _parse_range(xlim)
        ylim = _parse_range(ylim)
    base = _parse_section(entry, cfg.get(args, "section", None), axes)
    return GridSpec(base=base, axes=axes,
                    lows=(xlim[0], ylim[0]), highs=(xlim[1], ylim[1]),
                    shape=(n0, n1))


def _cmd_phase_field(args):
    cfg = _Config(args)
    entry = lookup(args.model)
    grid = _make_grid(args, cfg, entry)
    T = cfg.get(args, "horizon", None, float)
    workers = cfg.get(args, "workers", 1, int)
    field = phase_field(entry, grid, T=T, workers=workers)
    out = _out_path(args, cfg, "phase-field", entry.name)
    reports.write_phase_field(out, entry.name, field)
    n_bad = int((~field.converged).sum())
    print(f"wrote {out} ({field.theta.size} nodes, {n_bad} non-converged)")
    if cfg.get(args, "plot", False, bool):
        from .figures import plot_phase_field
        png = _plot_path(out)
        plot_phase_field(field, png, title=f"{entry.name} phase")
        print(f"wrote {png}")
    return 0


def _cmd_sensitivity(args):
    cfg = _Config(args)
    entry = lookup(args.model)
    method = cfg.get(args, "method", "two-point")
    if method not in ("two-point", "mdtheta"):
        raise ValueError(f"unknown method {method!r}")
    eps_text = cfg.get(args, "eps", None)
    eps_list = _parse_eps(eps_text) if eps_text else None
    n_pt = cfg.get(args, "n_pt", None, int)
    workers = cfg.get(args, "workers", 1, int)
    T = cfg.get(args, "horizon", None, float)
    if method == "two-point":
        curve = sensitivity_curve(entry, n_pt=n_pt, eps_list=eps_list,
                                  T=T, workers=workers)
    else:
        delta = cfg.get(args, "delta_theta", 0.5, float)
        curve = mdtheta_curve(entry, n_pt=n_pt, eps_list=eps_list,
                              delta_theta=delta, T=T, workers=workers)
    out = _out_path(args, cfg, "sensitivity", entry.name)
    reports.write_sensitivity_curve(out, entry.name, curve)
    print(f"alpha={curve.alpha:.6g} beta={curve.beta:.6g} "
          f"window=[{curve.fit_window[0]:.3g},{curve.fit_window[1]:.3g}] "
          f"residual={curve.fit_residual:.3g}")
    if curve.warning:
        print(f"warning: {curve.warning}")
    print(f"wrote {out}")
    if cfg.get(args, "plot", False, bool):
        from .figures import plot_sensitivity_curve
        png = _plot_path(out)
        plot_sensitivity_curve(curve, png, title=entry.name)
        print(f"wrote {png}")
    return 0


def _cmd_ftle(args):
    cfg = _Config(args)
    entry = lookup(args.model)
    grid = _make_grid(args, cfg, entry)
    T = cfg.get(args, "horizon", None, float)
    if T is None:
        raise ValueError("ftle requires a horizon (-T)")
    workers = cfg.get(args, "workers", 1, int)
    field = ftle_field(entry, grid, T, workers=workers)
    out = _out_path(args, cfg, "ftle", entry.name)
    reports.write_ftle_field(out, entry.name, field)
    ok = field.values[field.converged]
    print(f"wrote {out} (max exponent "
          f"{ok.max() if ok.size else float('nan'):.6g})")
    if cfg.get(args, "plot", False, bool):
        from .figures import plot_ftle_field
        png = _plot_path(out)
        plot_ftle_field(field, png, title=f"{entry.name} FTLE T={T:g}",
                        threshold=cfg.get(args, "threshold", None, float))
        print(f"wrote {png}")
    return 0


def _cmd_prc(args):
    cfg = _Config(args)
    entry = lookup(args.model)
    e = _parse_direction(entry, cfg.get(args, "e_dir", "0"))
    e = e * cfg.get(args, "e_mag", 1.0, float)
    n_theta = cfg.get(args, "n_theta", DEFAULT_N_THETA, int)
    workers = cfg.get(args, "workers", 1, int)
    curve = prc_curve(entry, e, n_theta=n_theta, workers=workers)
    out = _out_path(args, cfg, "prc", entry.name)
    reports.write_prc(out, entry.name, curve)
    print(f"wrote {out} ({int((~curve.converged).sum())} gaps)")
    if cfg.get(args, "plot", False, bool):
        from .figures import plot_prc
        png = _plot_path(out)
        plot_prc(curve, png, title=f"{entry.name} PRC")
        print(f"wrote {png}")
    if cfg.get(args, "boxdim", False, bool):
        sub = curve
        rng = cfg.get(args, "theta_range", None)
        if rng:
            lo, hi = _parse_range(rng)
            sub = curve.restricted(lo, hi)
        report = box_counting_dimension(sub)
        stem = out[:-4] if out.endswith(".csv") else out
        box_out = stem + "_boxdim.csv"
        reports.write_box_report(box_out, entry.name, report)
        print(f"dimension={report.dimension:.4g}")
        print(f"wrote {box_out}")
        if cfg.get(args, "plot", False, bool):
            from .figures import plot_box_report
            plot_box_report(report, stem + "_boxdim.png")
            print(f"wrote {stem + '_boxdim.png'}")
    return 0


def _cmd_network(args):
    cfg = _Config(args)
    entry = lookup(args.model)
    pulses_text = cfg.get(args, "pulses", None)
    pulses = (tuple(float(v) for v in pulses_text.split(","))
              if pulses_text else DEFAULT_PULSE_FRACTIONS)
    config = ExperimentConfig(
        model=entry.name,
        n_neurons=cfg.get(args, "n_neurons", 100, int),
        pulse_fractions=pulses,
        noise_sigma_fraction=cfg.get(args, "sigma_frac", 1e-6, float),
        seed=cfg.get(args, "seed", 0, int))
    report = run_network_experiment(config,
                                    workers=cfg.get(args, "workers", 1, int))
    out = _out_path(args, cfg, "network", entry.name)
    reports.write_network_report(out, report)
    print(f"overall mean={report.overall_mean:.6g} "
          f"max={report.overall_max:.6g}")
    for w in report.warnings:
        print(f"warning: {w}")
    print(f"wrote {out}")
    if cfg.get(args, "plot", False, bool):
        from .figures import plot_network_report
        png = _plot_path(out)
        plot_network_report(report, png)
        print(f"wrote {png}")
    return 0


def _cmd_build_refs(args):
    names = args.models or [e.name for e in catalog()
                            if e.kind == "continuous"]
    for name in names:
        entry = lookup(name)
        if entry.kind != "continuous":
            print(f"{name}: skipped (discrete)")
            continue
        if entry.reference_gamma_point is not None and not args.force:
            print(f"{name}: reference already present (use --force)")
            continue
        build_reference(entry)
        vr = v_range(entry)
        print(f"{name}: T0={entry.reference_T0:.10g} v_range={vr:.6g}")
    path = save_reference_points()
    print(f"wrote {path}")
    return 0


# ---------------------------------------------------------------------------
# Parser assembly.

def _add_common(sp, output=True):
    sp.add_argument("--config", help="key = value file supplying defaults")
    sp.add_argument("--workers", type=int,
                    help="worker threads (never changes output bytes; "
                         "default 1)")
    if output:
        sp.add_argument("-o", "--output", dest="output",
                        help="output CSV path (default: <command>_<model>"
                             ".csv)")
        sp.add_argument("--plot", action="store_const", const=True,
                        help="also render a PNG next to the CSV")


def _add_grid_flags(sp):
    sp.add_argument("--grid", help="nodes as RxC (default 201x201)")
    sp.add_argument("--axes", help="two scanned coordinates, by state name "
                                   "or index (default 0,1)")
    sp.add_argument("--xlim", help="first-axis range lo:hi (default: "
                                   "settled-cycle bounding box, inflated)")
    sp.add_argument("--ylim", help="second-axis range lo:hi")
    sp.add_argument("--section", help="fixed coordinates name=value,... "
                                      "(default: the model's anchor state)")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="phasesens",
        description="Asymptotic phase, phase sensitivity, FTLE fields, "
                    "phase response curves and network phase-error "
                    "experiments for the model catalog.",
        formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)
    epilog = _catalog_epilog()

    sp = sub.add_parser("list-models", help="print the model catalog",
                        epilog=epilog,
                        formatter_class=argparse.RawDescriptionHelpFormatter)
    sp.set_defaults(func=_cmd_list_models)

    sp = sub.add_parser(
        "period", help="estimate the cycle period / rotation number",
        epilog=epilog,
        formatter_class=argparse.RawDescriptionHelpFormatter)
    sp.add_argument("model")
    sp.add_argument("--rel-tol", dest="rel_tol", type=float,
                    help="integration tolerance (default 1e-8)")
    sp.add_argument("--transient-cycles", dest="transient_cycles",
                    type=float, help="settle time in cycles (default 200)")
    sp.add_argument("--cycles", type=int,
                    help="observation window in cycles (default 8)")
    sp.add_argument("--iters", type=int,
                    help="map iterations for rotation numbers "
                         "(default 10000000)")
    _add_common(sp, output=False)
    sp.set_defaults(func=_cmd_period)

    sp = sub.add_parser(
        "phase-field", help="asymptotic phase on a planar grid",
        epilog=epilog,
        formatter_class=argparse.RawDescriptionHelpFormatter)
    sp.add_argument("model")
    _add_grid_flags(sp)
    sp.add_argument("-T", dest="horizon", type=float,
                    help="averaging horizon (default: catalog T)")
    _add_common(sp)
    sp.set_defaults(func=_cmd_phase_field)

    sp = sub.add_parser(
        "sensitivity", help="averaged sensitivity curve and its exponent",
        epilog=epilog,
        formatter_class=argparse.RawDescriptionHelpFormatter)
    sp.add_argument("model")
    sp.add_argument("--method", choices=("two-point", "mdtheta"),
                    help="estimator (default two-point)")
    sp.add_argument("--delta-theta", dest="delta_theta", type=float,
                    help="exceedance threshold for mdtheta (default 0.5)")
    sp.add_argument("--eps", help="perturbation grid hi:lo:n, log spaced "
                                  "(default: 1e-2..1e-7 of the scan-set "
                                  "length, 12 values)")
    sp.add_argument("--n-pt", dest="n_pt", type=int,
                    help="sample points on the scan set (default: catalog "
                         "n_pt)")
    sp.add_argument("-T", dest="horizon", type=float,
                    help="averaging horizon (default: catalog T)")
    _add_common(sp)
    sp.set_defaults(func=_cmd_sensitivity)

    sp = sub.add_parser(
        "ftle", help="largest finite-time Lyapunov exponent on a grid",
        epilog=epilog,
        formatter_class=argparse.RawDescriptionHelpFormatter)
    sp.add_argument("model")
    _add_grid_flags(sp)
    sp.add_argument("-T", dest="horizon", type=float, required=True,
                    help="horizon (time units; iterations for maps)")
    sp.add_argument("--threshold", type=float,
                    help="contour level drawn on the plot")
    _add_common(sp)
    sp.set_defaults(func=_cmd_ftle)

    sp = sub.add_parser(
        "prc", help="phase response curve (optionally its box dimension)",
        epilog=epilog,
        formatter_class=argparse.RawDescriptionHelpFormatter)
    sp.add_argument("model")
    sp.add_argument("--e-dir", dest="e_dir",
                    help="perturbation direction: state name or comma "
                         "vector (default: first state)")
    sp.add_argument("--e-mag", dest="e_mag", type=float,
                    help="perturbation magnitude (default 1.0)")
    sp.add_argument("--n-theta", dest="n_theta", type=int,
                    help=f"phase grid size (default {DEFAULT_N_THETA})")
    sp.add_argument("--boxdim", action="store_const", const=True,
                    help="also box-count the curve graph")
    sp.add_argument("--theta-range", dest="theta_range",
                    help="restrict box counting to lo:hi phases")
    _add_common(sp)
    sp.set_defaults(func=_cmd_prc)

    sp = sub.add_parser(
        "network", help="network phase-error experiment",
        epilog=epilog,
        formatter_class=argparse.RawDescriptionHelpFormatter)
    sp.add_argument("model")
    sp.add_argument("--seed", type=int, help="RNG seed (default 0)")
    sp.add_argument("--pulses", help="pulse fractions of v_range, comma "
                                     "separated (default "
                    + ",".join(str(p) for p in DEFAULT_PULSE_FRACTIONS)
                    + ")")
    sp.add_argument("--sigma-frac", dest="sigma_frac", type=float,
                    help="noise sigma as a fraction of v_range "
                         "(default 1e-6)")
    sp.add_argument("--n-neurons", dest="n_neurons", type=int,
                    help="population size (default 100)")
    _add_common(sp)
    sp.set_defaults(func=_cmd_network)

    sp = sub.add_parser(
        "build-refs", help="build and persist on-cycle reference points",
        epilog=epilog,
        formatter_class=argparse.RawDescriptionHelpFormatter)
    sp.add_argument("models", nargs="*",
                    help="models to build (default: all continuous)")
    sp.add_argument("--force", action="store_true",
                    help="rebuild existing references")
    sp.set_defaults(func=_cmd_build_refs)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        if "unknown model" in str(exc):
            print("available models: " + ", ".join(model_names()),
                  file=sys.stderr)
        return USAGE_ERROR
    except PhasesensError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return NUMERICAL_ERROR


if __name__ == "__main__":
    sys.exit(main())
