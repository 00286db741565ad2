import math

import numpy as np
import pytest

from oldroyd_lab import cli
from oldroyd_lab import solver as so
from oldroyd_lab.harness import sample_times, write_series_csv
from oldroyd_lab.spectral import Grid


def test_fit_synthetic_power_law(tmp_path, capsys):
    t = sample_times(1.0, 1e4, 16)
    path = tmp_path / "s.csv"
    write_series_csv(path, {"t": t, "norm_u_0_2": 3 * (1 + t) ** -0.75})
    code = cli.main(["fit", str(path), "--window", "10", "1e4", "--rate", "0.75"])
    out = capsys.readouterr().out
    assert code == 0
    slope = float(out.split("slope ")[1].split()[0])
    assert slope == pytest.approx(-0.75, abs=1e-6)
    assert "pass" in out


def test_fit_verdict_failure_exit_code(tmp_path):
    t = sample_times(1.0, 1e4, 16)
    path = tmp_path / "s.csv"
    write_series_csv(path, {"t": t, "norm_u_0_2": (1 + t) ** -0.75})
    assert cli.main(["fit", str(path), "--rate", "0.3"]) == 2


def test_fit_missing_column(tmp_path, capsys):
    path = tmp_path / "s.csv"
    write_series_csv(path, {"t": np.arange(10.0) + 1, "energy": np.ones(10)})
    assert cli.main(["fit", str(path)]) == 1
    assert "not found" in capsys.readouterr().err


def test_linear_decay_prints_theory_rate(tmp_path, capsys):
    code = cli.main(["linear-decay", "--out", str(tmp_path), "--override", "s=0.5",
                     "--override", "n=2", "--override", "q=2.0"])
    out = capsys.readouterr().out
    assert "theory rate 0.25 (s=0.5)" in out
    assert code == 0
    assert (tmp_path / "series.csv").exists() and (tmp_path / "fits.csv").exists()


def test_linear_decay_config_file(tmp_path, capsys):
    cfg = tmp_path / "run.toml"
    cfg.write_text('s = 0.6\nalphas = [0.0]\n[time]\nt_end = 1e3\n[fit]\nwindow = [1e2, 1e3]\n')
    code = cli.main(["linear-decay", "--config", str(cfg), "--out", str(tmp_path / "o")])
    assert code == 0
    assert "theory rate 0.3 " in capsys.readouterr().out


def test_window_violation_is_error(tmp_path, capsys):
    code = cli.main(["linear-decay", "--override", "alphas=[0.5]", "--out", str(tmp_path)])
    assert code == 1
    assert "alpha <= n/q - 1" in capsys.readouterr().err


def test_besov_zero_checkpoint(tmp_path, capsys):
    path = tmp_path / "zero.oldb"
    so.write_checkpoint(path, so.initial_state(Grid(2, 16, L=4 * math.pi)))
    assert cli.main(["besov", str(path)]) == 0
    out = capsys.readouterr().out
    values = [float(line.split("=")[-1]) for line in out.splitlines() if " = " in line]
    assert len(values) == 7 and all(v == 0 for v in values)


def test_besov_nonzero_checkpoint(tmp_path, capsys):
    path = tmp_path / "s.oldb"
    g = Grid(2, 32, L=8 * math.pi)
    so.write_checkpoint(path, so.saturating_initial_data(g, 0.75, A=0.1, seed=2))
    assert cli.main(["besov", str(path), "--s", "0.5"]) == 0
    out = capsys.readouterr().out
    assert "besov_u(s=0.5,p=2)" in out


def test_simulate_small(tmp_path, capsys):
    code = cli.main(["simulate", "--out", str(tmp_path), "--seed", "1",
                     "--override", "N=32", "--override", "L=25.132741228718345",
                     "--override", "t_end=4.0", "--override", "fit.window=[0.5, 4.0]"])
    out = capsys.readouterr().out
    assert code in (0, 2)
    assert "norm_pair_0_2" in out
    assert (tmp_path / "final.oldb").exists()


def test_lemma_census_command(capsys):
    code = cli.main(["lemma-census", "--samples", "3", "--grids", "32", "64"])
    out = capsys.readouterr().out
    assert "N=32" in out and "N=64" in out
    assert code in (0, 2)


@pytest.mark.parametrize("argv", [["bogus"], ["fit"], ["linear-decay", "--nope"], []])
def test_usage_errors(argv, capsys):
    assert cli.main(argv) == 1
    assert "usage" in capsys.readouterr().err


def test_help_exits_zero(capsys):
    assert cli.main(["--help"]) == 0
    assert "linear-decay" in capsys.readouterr().out


def test_bad_override(capsys):
    assert cli.main(["linear-decay", "--override", "nonsense"]) == 1
    assert "key=value" in capsys.readouterr().err
