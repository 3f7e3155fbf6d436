import json
import subprocess
import sys

import pytest

from intermodal.cli import main


def test_solve_toy(tmp_path, capsys):
    out = tmp_path / "rec.json"
    lp = tmp_path / "toy.lp"
    assert main(["solve", "--config", "toy", "--out", str(out), "--lp-out", str(lp)]) == 0
    shown = json.loads(capsys.readouterr().out)
    assert set(shown) >= {"t_avg", "share_amod", "objective"}
    assert json.loads(out.read_text())["verified"] is True
    assert "Subject To" in lp.read_text()


def test_solve_pwl_override(capsys):
    assert main(["solve", "--config", "toy", "--congestion", "pwl", "--pwl-segments", "2"]) == 0
    pwl = json.loads(capsys.readouterr().out)["objective"]
    assert main(["--congestion", "threshold", "solve", "--config", "toy"]) == 0
    thr = json.loads(capsys.readouterr().out)["objective"]
    assert pwl != thr


def test_sweep_command(tmp_path, capsys):
    out = tmp_path / "s.csv"
    assert main(["sweep", "--config", "toy", "--param", "n_M", "--values", "0:30:10", "--out", str(out)]) == 0
    text = capsys.readouterr().out
    assert "4 points, 0 failed" in text
    assert out.exists() and (tmp_path / "s.csv.json").exists()


def test_validate_command(capsys):
    assert main(["validate", "--config", "toy"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) == 4 and all(line.startswith("PASS") for line in lines)


def _run(argv):
    try:
        return main(argv)
    except SystemExit as exc:
        return exc.code


@pytest.mark.parametrize("argv, code", [
    ([], 1),
    (["solve"], 1),
    (["sweep", "--config", "toy", "--param", "bogus", "--values", "1", "--out", "x.csv"], 1),
    (["sweep", "--config", "toy", "--param", "n_R", "--values", "1:2", "--out", "x.csv"], 1),
    (["solve", "--config", "does-not-exist.json"], 2),
])
def test_exit_codes(argv, code, tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    assert _run(argv) == code


def test_bad_data_exit_code(tmp_path, capsys):
    net = tmp_path / "net.tntp"
    net.write_text("<NUMBER OF NODES> 2\n<NUMBER OF LINKS> 1\n<END OF METADATA>\n1 2 1 1 ;\n")
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"network": "net.tntp", "trips": "toy_trips.tntp"}))
    assert main(["solve", "--config", str(cfg)]) == 2
    assert "line 4" in capsys.readouterr().err


def test_invalid_config_value_exit_code(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"network": "toy_net.tntp", "trips": "toy_trips.tntp", "n_R": -1}))
    assert main(["solve", "--config", str(cfg)]) == 2


def test_infeasible_and_numerical_exit_codes(monkeypatch):
    # walking keeps every shipped scenario feasible, so stub the runner
    from intermodal import cli
    from intermodal.errors import NumericalFailure

    def infeasible(cfg):
        raise cli.InfeasibleScenario("scenario is infeasible")

    def numerical(cfg):
        raise NumericalFailure("residual too large")

    monkeypatch.setattr(cli, "run_scenario", infeasible)
    assert main(["solve", "--config", "toy"]) == 3
    monkeypatch.setattr(cli, "run_scenario", numerical)
    assert main(["solve", "--config", "toy"]) == 4


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "intermodal", "--help"], capture_output=True, text=True)
    assert res.returncode == 0 and "validate" in res.stdout
