import io
import subprocess
import sys

import numpy as np
import pytest

from cellgeom import cli
from cellgeom.analytics import NetworkConfig, sir_ccdf
from cellgeom.propagation import ThreeGpp


def run_cli(*args, env=None):
    return subprocess.run([sys.executable, "-m", "cellgeom", *args], capture_output=True, env=env)


def read_csv(text):
    rows = [line for line in text.splitlines() if line and not line.startswith("#")]
    header = rows[0].split(",")
    data = np.array([[float(x) for x in r.split(",")] for r in rows[1:]])
    return header, data


def comments(text):
    return dict(line[2:].split(": ", 1) for line in text.splitlines() if line.startswith("# ") and ": " in line)


def test_ccdf_both_engines_deterministic():
    args = ["ccdf", "--lambda", "100", "--los", "quadexp", "--L", "82.5m", "--engine", "both", "--seed", "7"]
    a, b = run_cli(*args), run_cli(*args)
    assert a.returncode == 0, a.stderr
    assert a.stdout == b.stdout
    header, data = read_csv(a.stdout.decode())
    assert header == ["threshold_db", "analytic_ccdf", "mc_ccdf", "mc_ci"]
    assert data.shape == (101, 4)
    assert float(comments(a.stdout.decode())["grid_kolmogorov"]) < 0.02
    assert b"\r\n" not in a.stdout


def test_ccdf_negative_lambda():
    out = run_cli("ccdf", "--lambda", "-5")
    assert out.returncode == 2
    assert b"lambda must be positive" in out.stderr
    assert out.stdout == b""


def test_ccdf_threegpp_analytic_uses_numeric_path(capsys):
    assert cli.main(["ccdf", "--los", "3gpp", "--engine", "analytic", "--lambda", "100"]) == 0
    text = capsys.readouterr().out
    header, data = read_csv(text)
    assert header == ["threshold_db", "analytic_ccdf"]
    cfg = NetworkConfig(lam=100.0, los=ThreeGpp())
    np.testing.assert_allclose(data[:, 1], sir_ccdf(cfg, 10 ** (data[:, 0] / 10)), rtol=1e-12)


def test_ccdf_threegpp_analytic_vs_mc(capsys):
    assert cli.main(["ccdf", "--los", "3gpp", "--engine", "both", "--lambda", "100", "--trials", "20000", "--seed", "3"]) == 0
    assert float(comments(capsys.readouterr().out)["grid_kolmogorov"]) < 0.02


def test_ccdf_thresholds_and_output_file(tmp_path, capsys):
    out = tmp_path / "c.csv"
    assert cli.main(["ccdf", "--thresholds=-10,0,10", "--out", str(out)]) == 0
    assert capsys.readouterr().out == ""
    header, data = read_csv(out.read_text())
    np.testing.assert_array_equal(data[:, 0], [-10.0, 0.0, 10.0])


def test_partial_failure_exit_code(monkeypatch, capsys):
    def broken(*a, **k):
        raise ArithmeticError("no convergence")

    monkeypatch.setattr(cli, "sir_ccdf", broken)
    assert cli.main(["ccdf", "--thresholds=0"]) == 1
    captured = capsys.readouterr()
    assert "failed: analytic_ccdf: no convergence" in captured.err
    assert "# failed: analytic_ccdf" in captured.out
    assert ",nan" in captured.out


@pytest.mark.slow
def test_sweep_lambda_rows(tmp_path):
    out = tmp_path / "s.csv"
    res = run_cli("sweep", "--var", "lambda", "--values", "1:10000:log17", "--metrics", "se,ase,outage@-5dB", "--out", str(out))
    assert res.returncode == 0, res.stderr
    header, data = read_csv(out.read_text())
    assert header == ["lambda", "se", "ase", "outage@-5dB"]
    assert data.shape == (17, 4)
    np.testing.assert_allclose(data[:, 0], np.logspace(0, 4, 17))
    np.testing.assert_allclose(data[:, 2], data[:, 0] * data[:, 1], rtol=1e-12)


def test_sweep_L_series(capsys):
    assert cli.main(["sweep", "--var", "L", "--values", "40m,82.5m,120m", "--metrics", "outage@-10dB", "--lambda", "1000"]) == 0
    text = capsys.readouterr().out
    header, data = read_csv(text)
    assert header == ["L_km", "outage@-10dB"]
    np.testing.assert_allclose(data[:, 0], [0.040, 0.0825, 0.120])
    assert "content_hash" in comments(text)


def test_sweep_malformed_metric_token_echoed():
    res = run_cli("sweep", "--var", "lambda", "--values", "10,100", "--metrics", "se,outage@fivedB")
    assert res.returncode == 2
    assert b"outage@fivedB" in res.stderr


def test_sweep_plot_script(tmp_path, capsys):
    csv_path, plot = tmp_path / "o.csv", tmp_path / "o.gp"
    assert cli.main(["sweep", "--var", "lambda", "--values", "10,100,1000", "--metrics", "outage@-5dB",
                     "--out", str(csv_path), "--plot-script", str(plot)]) == 0
    script = plot.read_text()
    assert str(csv_path) in script and "set logscale x" in script


def test_sweep_optimum(capsys):
    assert cli.main(["sweep", "--var", "lambda", "--values", "1:10000:log9", "--metrics", "outage@-5dB", "--optimum"]) == 0
    assert '"unimodal":true' in comments(capsys.readouterr().out)["optimum"]


def test_losprob_grid_and_crossing(capsys):
    assert cli.main(["losprob"]) == 0
    text = capsys.readouterr().out
    header, data = read_csv(text)
    assert header == ["d_m", "quadexp", "3gpp", "explinear"]
    assert data.shape == (501, 4)
    np.testing.assert_array_equal(data[:, 0], np.arange(501.0))
    assert float(comments(text)["crossing_gap_steps"]) <= 1.0
    # clamped ExpLinear: never above one, exactly one before the knee at p/alpha ~ 11.8 m
    assert data[:, 3].max() <= 1.0
    assert np.all(data[:12, 3] == 1.0) and data[12, 3] < 1.0


def test_losprob_custom_grid(capsys):
    assert cli.main(["losprob", "--models", "quadexp", "--L", "0.1km", "--dmax", "100", "--step", "10m"]) == 0
    header, data = read_csv(capsys.readouterr().out)
    assert header == ["d_m", "quadexp"] and data.shape == (11, 2)
    np.testing.assert_allclose(data[:, 1], np.exp(-((data[:, 0] / 100.0) ** 2)))


def test_config_file_and_overrides(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# demo\nlambda = 1000\nL = 40   # meters\nthresholds = -10:10:3\n")
    assert cli.main(["ccdf", "--config", str(cfg)]) == 0
    text = capsys.readouterr().out
    c = comments(text)
    assert c["lambda"] == "1000.0" and c["L"] == "0.04"
    assert cli.main(["ccdf", "--config", str(cfg), "--lambda", "10"]) == 0
    assert comments(capsys.readouterr().out)["lambda"] == "10.0"


def test_config_file_unknown_key(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("lambda = 10\nspeed = 3\n")
    assert cli.main(["ccdf", "--config", str(cfg)]) == 2
    assert "unknown key 'speed'" in capsys.readouterr().err


@pytest.mark.parametrize("argv", [
    ["ccdf", "--L", "abc"],
    ["ccdf", "--trials", "1.5"],
    ["sweep", "--var", "lambda", "--values", "1:10"],
    ["sweep", "--var", "L", "--values", "40m", "--los", "3gpp"],
    ["ccdf", "--seed", "-1"],
])
def test_invalid_inputs_exit_2(argv, capsys):
    assert cli.main(argv) == 2
    assert capsys.readouterr().err.startswith("error:")


def test_seed_environment_fallback(monkeypatch, capsys):
    args = ["ccdf", "--engine", "montecarlo", "--trials", "300", "--thresholds=0"]
    monkeypatch.setenv("CELLGEOM_SEED", "11")
    cli.main(args)
    env11 = capsys.readouterr().out
    cli.main(args + ["--seed", "11"])
    assert capsys.readouterr().out == env11
    monkeypatch.setenv("CELLGEOM_SEED", "12")
    cli.main(args)
    assert capsys.readouterr().out != env11


def test_far_field_flag(capsys):
    args = ["ccdf", "--los", "always", "--engine", "montecarlo", "--trials", "500", "--thresholds=0"]
    assert cli.main(args) == 0
    on = read_csv(capsys.readouterr().out)[1][0, 1]
    assert cli.main(args + ["--far-field", "off"]) == 0
    text = capsys.readouterr().out
    assert comments(text)["far_field"] == "off"
    # without the far field the truncated AlwaysLos field looks far less interfered
    assert read_csv(text)[1][0, 1] > on + 0.05


def test_parse_helpers():
    assert cli.parse_length("82.5m") == pytest.approx(0.0825)
    assert cli.parse_length("82.5") == pytest.approx(0.0825)
    assert cli.parse_length("0.5km") == 0.5
    assert cli.parse_values("40m,82.5m,120m", "L") == pytest.approx([0.04, 0.0825, 0.12])
    assert len(cli.parse_values("1:10000:log17", "lambda")) == 17
    assert cli.parse_values("0:1:3", "lambda") == [0.0, 0.5, 1.0]


def test_help_mentions_units():
    buf = io.StringIO()
    with pytest.raises(SystemExit):
        sys_stdout, sys.stdout = sys.stdout, buf
        try:
            cli.main(["ccdf", "--help"])
        finally:
            sys.stdout = sys_stdout
    assert "BS/km^2" in buf.getvalue() and "(m" in buf.getvalue()
