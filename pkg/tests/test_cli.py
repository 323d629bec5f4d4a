"""Experiment driver: config parsing, report emission, exit codes."""

import math
from pathlib import Path

import pytest

from critlab.cli import CSV_COLUMNS, ExperimentConfig, main, parse_config, read_rows
from critlab.errors import ConfigError


def write_cfg(tmp_path: Path, text: str) -> str:
    p = tmp_path / "exp.cfg"
    p.write_text(text)
    return str(p)


BASE = """
# minimal sweep
family = constant
nu = 0.5
a0 = 1.0
t_min = 1
t_max = 10
t_points = 2
s_list = 0
"""


def test_parse_config_defaults_and_comments(tmp_path):
    cfg = parse_config(write_cfg(tmp_path, BASE))
    assert cfg.family == "constant"
    assert cfg.t_points == 2
    assert cfg.s_list == [0.0]
    assert cfg.seed is None


def test_parse_config_unknown_field(tmp_path):
    path = write_cfg(tmp_path, "familly = constant\n")
    with pytest.raises(ConfigError, match="familly"):
        parse_config(path)


def test_parse_config_bad_value(tmp_path):
    path = write_cfg(tmp_path, "nu = many\n")
    with pytest.raises(ConfigError, match="nu"):
        parse_config(path)


def test_unknown_family_exits_2(tmp_path, capsys):
    path = write_cfg(tmp_path, "family = exotic\n")
    code = main(["solve", "--config", path, "--out", str(tmp_path / "r")])
    assert code == 2
    assert "family" in capsys.readouterr().err


def test_solve_writes_idempotent_csv(tmp_path, capsys):
    path = write_cfg(tmp_path, BASE)
    out = tmp_path / "reports"
    assert main(["solve", "--config", path, "--out", str(out)]) == 0
    first = (out / "solve.csv").read_bytes()
    assert main(["solve", "--config", path, "--out", str(out)]) == 0
    assert (out / "solve.csv").read_bytes() == first
    rows = read_rows(out / "solve.csv")
    assert rows and all(len(CSV_COLUMNS) == 8 for _ in rows)
    tags = {r[1] for r in rows}
    assert {"q", "R", "P11"} <= tags
    # exact column populated with the closed-form survival value at t = 1
    qrow = [r for r in rows if r[1] == "q" and r[2] == 1.0][0]
    assert qrow[3] == pytest.approx((1.5) ** -2)


def test_simulate_requires_seed(tmp_path, capsys):
    path = write_cfg(tmp_path, BASE + "mc_n = 100\n")
    assert main(["simulate", "--config", path, "--out", str(tmp_path / "r")]) == 2


def test_simulate_deterministic_and_stderr_column(tmp_path):
    path = write_cfg(tmp_path, BASE + "mc_n = 2000\nseed = 9\n")
    out1, out2 = tmp_path / "r1", tmp_path / "r2"
    assert main(["simulate", "--config", path, "--out", str(out1)]) == 0
    assert main(["simulate", "--config", path, "--out", str(out2)]) == 0
    assert (out1 / "simulate.csv").read_bytes() == (out2 / "simulate.csv").read_bytes()
    rows = read_rows(out1 / "simulate.csv")
    for row in rows:
        p = row[4]
        assert row[7] and float(row[7]) == pytest.approx(math.sqrt(p * (1 - p) / 2000))


def test_simulate_seed_override_changes_output(tmp_path):
    path = write_cfg(tmp_path, BASE + "mc_n = 2000\nseed = 9\n")
    out1, out2 = tmp_path / "r1", tmp_path / "r2"
    main(["simulate", "--config", path, "--out", str(out1)])
    main(["simulate", "--config", path, "--out", str(out2), "--seed", "10"])
    assert (out1 / "simulate.csv").read_bytes() != (out2 / "simulate.csv").read_bytes()


def test_trajectory_dump(tmp_path):
    path = write_cfg(tmp_path, BASE + "mc_n = 50\nseed = 4\ntrajectories = 3\n")
    out = tmp_path / "r"
    assert main(["simulate", "--config", path, "--out", str(out)]) == 0
    lines = (out / "trajectories.txt").read_text().splitlines()
    ids = {line.split()[0] for line in lines}
    assert ids == {"0", "1", "2"}
    first = lines[0].split()
    assert float(first[1]) == 0.0 and int(first[2]) == 1


def test_verify_only_single_criterion(tmp_path, capsys):
    out = tmp_path / "r"
    assert main(["verify", "--only", "C1", "--out", str(out)]) == 0
    text = capsys.readouterr().out
    assert "PASS C1" in text
    assert (out / "acceptance.csv").exists()


def test_verify_only_accepts_tag_names(tmp_path, capsys):
    assert main(["verify", "--only", "closed-form-q", "--out", str(tmp_path / "r")]) == 0
    assert main(["verify", "--only", "bogus-tag", "--out", str(tmp_path / "r")]) == 2


def test_verify_failing_band_exits_1(tmp_path, capsys):
    # the sup-rate band is the documented red criterion and runs fast
    assert main(["verify", "--only", "C7", "--out", str(tmp_path / "r")]) == 1
    assert "FAIL C7" in capsys.readouterr().out


def test_solver_failure_exits_3(tmp_path, capsys):
    # the coupled-family normalizer is undefined below t = 1/(nu*a0) = 2,
    # so a sweep at t = 1 is a numerical failure, not a config error
    cfg = "family = coupled_drift\nnu = 0.5\na0 = 1.0\nt_min = 1\nt_max = 1\nt_points = 1\ns_list = 0\n"
    path = write_cfg(tmp_path, cfg)
    assert main(["solve", "--config", path, "--out", str(tmp_path / "r")]) == 3
    assert "normalizer" in capsys.readouterr().err


def test_rates_command_recovers_slope(tmp_path, capsys):
    out = tmp_path / "fit.csv"
    lines = [",".join(CSV_COLUMNS)]
    for t in (1e1, 1e2, 1e3, 1e4, 1e5):
        lines.append(f"syn,decay,{t:.17g},1,1,{3.0 / t:.17g},oracle,")
    out.write_text("\n".join(lines) + "\n")
    assert main(["rates", str(out)]) == 0
    text = capsys.readouterr().out
    row = [l for l in text.splitlines() if l.startswith("decay")][0]
    assert float(row.split(",")[1]) == pytest.approx(-1.0, abs=1e-6)


def test_report_command_summarizes(tmp_path, capsys):
    path = write_cfg(tmp_path, BASE)
    out = tmp_path / "r"
    main(["solve", "--config", path, "--out", str(out)])
    assert main(["report", str(out / "solve.csv")]) == 0
    text = capsys.readouterr().out
    assert "q" in text and "max|err|" in text


def test_rates_requires_input(capsys):
    assert main(["rates"]) == 2


def test_threads_env_fallback(tmp_path, monkeypatch):
    path = write_cfg(tmp_path, BASE + "mc_n = 1000\nseed = 9\n")
    out1, out2 = tmp_path / "r1", tmp_path / "r2"
    main(["simulate", "--config", path, "--out", str(out1)])
    monkeypatch.setenv("CRITLAB_THREADS", "2")
    main(["simulate", "--config", path, "--out", str(out2)])
    # seed-split batches make results independent of the worker count
    assert (out1 / "simulate.csv").read_bytes() == (out2 / "simulate.csv").read_bytes()


def test_config_t_grid_validation():
    cfg = ExperimentConfig(t_min=10.0, t_max=1.0)
    with pytest.raises(ConfigError):
        cfg.t_grid()
