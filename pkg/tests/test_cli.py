"""Command-line interface: exit codes, artifact layout, config-file
resolution, worker byte-determinism, and the documented error paths.
All invocations run in-process against a temporary working directory."""

import numpy as np
import pytest

import phasesens.models
from phasesens.cli import main
from phasesens.models import lookup, model_names
from phasesens.phase import phase_of

ALL_MODELS = {
    "van_der_pol", "lorenz_r320", "map_fig1b", "map_eq5",
    "ml_square_wave", "ml_elliptic", "ml_parabolic", "hindmarsh_rose",
    "fitzhugh_rinzel", "plant",
}


@pytest.fixture(autouse=True)
def in_tmp(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    return tmp_path


def data_rows(path):
    lines = [ln for ln in open(path) if not ln.startswith("#")]
    return lines[0].strip(), lines[1:]


def test_list_models_prints_catalog(capsys):
    assert main(["list-models"]) == 0
    out = capsys.readouterr().out
    for name in ALL_MODELS:
        assert name in out


def test_unknown_model_exits_2_with_catalog(capsys):
    assert main(["period", "nonexistent"]) == 2
    err = capsys.readouterr().err
    assert "unknown model" in err
    assert "van_der_pol" in err


def test_help_documents_model_defaults(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["period", "--help"])
    assert exc.value.code == 0
    out = capsys.readouterr().out
    assert "omega0=" in out
    assert "plant" in out


def test_period_matches_catalog_frequency(capsys):
    assert main(["period", "van_der_pol"]) == 0
    out = capsys.readouterr().out
    w0 = float(out.split("omega0=")[1].split()[0])
    assert w0 == pytest.approx(0.942958, rel=1e-3)


def test_period_rotation_number(capsys):
    assert main(["period", "map_eq5", "--iters", "100000"]) == 0
    out = capsys.readouterr().out
    nu = float(out.split("rotation_number=")[1].split()[0])
    assert nu == pytest.approx(0.24482525, abs=1e-5)


def test_phase_field_grid_csv(tmp_path, capsys):
    code = main(["phase-field", "van_der_pol", "--grid", "3x3",
                 "--xlim=-2:2", "--ylim=-2:2", "-o", "pf.csv"])
    assert code == 0
    header, rows = data_rows(tmp_path / "pf.csv")
    assert header == "i,j,x1,x2,theta,converged"
    assert len(rows) == 9
    xs = {r.split(",")[2] for r in rows}
    assert xs == {"-2", "0", "2"}


def test_single_node_grid_equals_phase_of(tmp_path):
    code = main(["phase-field", "van_der_pol", "--grid", "1x1",
                 "--xlim", "1.5:1.5", "--ylim", "0.5:0.5",
                 "-o", "one.csv"])
    assert code == 0
    _, rows = data_rows(tmp_path / "one.csv")
    got = float(rows[0].split(",")[4])
    pv = phase_of(lookup("van_der_pol"), np.array([1.5, 0.5]))
    assert got == pytest.approx(pv.theta, rel=1e-8)
    assert rows[0].strip().endswith(",1")


def test_sensitivity_writes_fit_metadata(tmp_path, capsys):
    code = main(["sensitivity", "map_fig1b", "--n-pt", "100",
                 "--eps", "1e-2:1e-5:6", "-o", "sens.csv"])
    assert code == 0
    text = (tmp_path / "sens.csv").read_text()
    assert "# alpha=" in text
    assert "# beta=" in text
    header, rows = data_rows(tmp_path / "sens.csv")
    assert header == "epsilon,mean_f,n_valid"
    assert len(rows) == 6
    out = capsys.readouterr().out
    assert "alpha=" in out and "beta=" in out


def test_workers_never_change_output_bytes(tmp_path):
    argv = ["sensitivity", "map_fig1b", "--n-pt", "100",
            "--eps", "1e-2:1e-5:6"]
    assert main(argv + ["--workers", "1", "-o", "w1.csv"]) == 0
    assert main(argv + ["--workers", "3", "-o", "w3.csv"]) == 0
    assert (tmp_path / "w1.csv").read_bytes() == \
        (tmp_path / "w3.csv").read_bytes()


def test_config_file_supplies_flag_defaults(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# sweep config\nn_pt = 100\neps = 1e-2:1e-5:6\n")
    assert main(["sensitivity", "map_fig1b", "--config", str(cfg),
                 "-o", "c1.csv"]) == 0
    assert main(["sensitivity", "map_fig1b", "--n-pt", "100",
                 "--eps", "1e-2:1e-5:6", "-o", "c2.csv"]) == 0
    assert (tmp_path / "c1.csv").read_bytes() == \
        (tmp_path / "c2.csv").read_bytes()


def test_cli_flag_overrides_config(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("method = mdtheta\nn_pt = 100\neps = 1e-2:1e-5:6\n")
    # the flag wins over the config file, so the two-point fit succeeds
    assert main(["sensitivity", "map_fig1b", "--method", "two-point",
                 "--config", str(cfg), "-o", "o.csv"]) == 0


def test_bad_eps_spec_exits_2(capsys):
    assert main(["sensitivity", "map_fig1b", "--eps", "1e-5:1e-2:6"]) == 2
    assert "error:" in capsys.readouterr().err


def test_numerical_failure_exits_3(capsys):
    """The exceedance fit on the weakly sensitive torus map finds no
    nonzero fractions at these sizes and must fail loudly, not silently."""
    code = main(["sensitivity", "map_fig1b", "--method", "mdtheta",
                 "--n-pt", "100", "--eps", "1e-2:1e-5:6", "-o", "m.csv"])
    assert code == 3
    assert "numerical failure" in capsys.readouterr().err


def test_ftle_requires_horizon():
    with pytest.raises(SystemExit) as exc:
        main(["ftle", "map_eq5", "--grid", "9x9"])
    assert exc.value.code == 2


def test_ftle_map_grid(tmp_path, capsys):
    code = main(["ftle", "map_eq5", "--grid", "9x9", "-T", "35",
                 "-o", "ftle.csv"])
    assert code == 0
    header, rows = data_rows(tmp_path / "ftle.csv")
    assert header == "i,j,x1,x2,ftle,converged"
    assert len(rows) == 81
    assert "max exponent" in capsys.readouterr().out


def test_prc_with_box_dimension(tmp_path, capsys):
    code = main(["prc", "van_der_pol", "--n-theta", "512",
                 "--e-mag", "0.05", "--boxdim", "-o", "prc.csv"])
    assert code == 0
    header, rows = data_rows(tmp_path / "prc.csv")
    assert header == "theta,Z,converged"
    assert len(rows) == 512
    box = (tmp_path / "prc_boxdim.csv").read_text()
    assert "# dimension=" in box
    # a smooth response curve has dimension about one
    dim = float(box.split("# dimension=")[1].split()[0])
    assert dim == pytest.approx(1.0, abs=0.1)


def test_prc_too_coarse_for_boxdim_exits_3(capsys):
    code = main(["prc", "van_der_pol", "--n-theta", "64",
                 "--e-mag", "0.05", "--boxdim", "-o", "prc64.csv"])
    assert code == 3
    assert "resolvable" in capsys.readouterr().err


def test_network_report_layout(tmp_path, capsys):
    code = main(["network", "fitzhugh_rinzel", "--n-neurons", "12",
                 "--pulses", "0.1,0.2", "--seed", "5", "-o", "net.csv"])
    assert code == 0
    header, rows = data_rows(tmp_path / "net.csv")
    assert header.startswith("pulse_size,mean_error,max_error")
    assert len(rows) == 3
    assert rows[-1].startswith("overall,")
    assert "overall mean=" in capsys.readouterr().out


def test_network_on_non_bursting_model_exits_2(capsys):
    assert main(["network", "van_der_pol"]) == 2
    assert "bursting" in capsys.readouterr().err


def test_plot_writes_png(tmp_path):
    code = main(["phase-field", "van_der_pol", "--grid", "3x3",
                 "--xlim=-2:2", "--ylim=-2:2", "-o", "vis.csv", "--plot"])
    assert code == 0
    assert (tmp_path / "vis.png").exists()
    assert (tmp_path / "vis.png").stat().st_size > 0


def test_build_refs_skips_existing(tmp_path, monkeypatch, capsys):
    monkeypatch.setattr(phasesens.models, "reference_data_path",
                        lambda: tmp_path / "refs.txt")
    assert main(["build-refs", "van_der_pol"]) == 0
    out = capsys.readouterr().out
    assert "already present" in out
    assert (tmp_path / "refs.txt").exists()


def test_default_output_name(tmp_path):
    assert main(["ftle", "map_eq5", "--grid", "5x5", "-T", "10"]) == 0
    assert (tmp_path / "ftle_map_eq5.csv").exists()


def test_section_and_axes_by_name(tmp_path):
    code = main(["phase-field", "lorenz_r320", "--grid", "2x2",
                 "--axes", "x,y", "--xlim=-10:10", "--ylim=-10:10",
                 "--section", "z=319", "-o", "sec.csv"])
    assert code == 0
    text = (tmp_path / "sec.csv").read_text()
    assert "# section: 2=319" in text


def test_scan_axis_in_section_rejected(capsys):
    code = main(["phase-field", "lorenz_r320", "--grid", "2x2",
                 "--axes", "x,y", "--xlim=-10:10", "--ylim=-10:10",
                 "--section", "x=0", "-o", "bad.csv"])
    assert code == 2
    assert "scan axis" in capsys.readouterr().err
