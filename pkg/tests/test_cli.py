import json
import subprocess
import sys
from pathlib import Path

import pytest

from oscavg.cli import main

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"


def write_config(tmp_path, name="mini", **overrides):
    raw = {
        "name": name,
        "seed": 3,
        "problem": {
            "kind": "matrix",
            "dimension": 1,
            "operator": {"modes": [{"freq": 0.0, "cos": [[1.0]]}, {"freq": 1.0, "cos": [[1.0]]}]},
            "nonlinearity": {"terms": []},
            "initial": [1.0],
            "horizon": 1.0,
        },
        "lambdas": [0.125, 0.0625, 0.03125],
        "steps": "auto",
        "checks": ["stability"],
        "output": {"directory": None},
    }
    raw.update(overrides)
    path = tmp_path / f"{name}.json"
    path.write_text(json.dumps(raw))
    return path


class TestSweepCommand:
    def test_sweep_writes_reports(self, tmp_path, capsys):
        cfg = write_config(tmp_path)
        code = main(["sweep", str(cfg), "--out", str(tmp_path / "out")])
        assert code == 0
        lines = (tmp_path / "out" / "mini.csv").read_text().strip().split("\n")
        assert lines[0] == "lambda,sup_error,terminal_error,wall_ms"
        assert len(lines) == 4
        payload = json.loads((tmp_path / "out" / "mini.json").read_text())
        assert "timestamp" in payload
        out = capsys.readouterr().out
        assert "fitted rate" in out

    def test_sweep_repeat_is_byte_identical(self, tmp_path):
        cfg = write_config(tmp_path)
        first_dir, second_dir = tmp_path / "a", tmp_path / "b"
        assert main(["sweep", str(cfg), "--out", str(first_dir)]) == 0
        assert main(["sweep", str(cfg), "--out", str(second_dir)]) == 0
        assert (first_dir / "mini.csv").read_bytes() == (second_dir / "mini.csv").read_bytes()

    def test_lambda_and_steps_overrides(self, tmp_path):
        cfg = write_config(tmp_path)
        out = tmp_path / "out"
        code = main(["sweep", str(cfg), "--out", str(out), "--lambda", "0.25,0.125", "--steps", "512"])
        assert code == 0
        lines = (out / "mini.csv").read_text().strip().split("\n")
        assert len(lines) == 3
        assert lines[1].startswith("0.25,")

    def test_bundled_scalar_linear_config(self, tmp_path):
        code = main(["sweep", str(CONFIG_DIR / "scalar_linear.json"), "--out", str(tmp_path)])
        assert code == 0
        lines = (tmp_path / "scalar_linear.csv").read_text().strip().split("\n")
        assert len(lines) == 7


class TestSolveCommand:
    def test_solve_writes_trajectory(self, tmp_path):
        cfg = write_config(tmp_path)
        code = main(["solve", str(cfg), "--out", str(tmp_path / "out")])
        assert code == 0
        lines = (tmp_path / "out" / "mini_trajectory.csv").read_text().strip().split("\n")
        assert lines[0] == "t,u_1"
        assert len(lines) > 100

    def test_transport_solve_writes_final_state(self, tmp_path):
        raw_problem = {
            "kind": "transport",
            "grid": {"points": 16, "components": 1},
            "advection": {"modes": [{"freq": 1.0, "cos": 1.0}]},
            "initial": {"fourier": [{"k": 1, "sin": 1.0}]},
            "horizon": 0.25,
        }
        cfg = write_config(tmp_path, name="tr", problem=raw_problem, lambdas=[0.25], checks=[])
        code = main(["solve", str(cfg), "--out", str(tmp_path / "out")])
        assert code == 0
        final = (tmp_path / "out" / "tr_final_state.csv").read_text().strip().split("\n")
        assert final[0] == "x,u_1"
        assert len(final) == 17


class TestAverageCommand:
    def test_autonomous_config_satisfied(self, tmp_path, capsys):
        raw_problem = {
            "kind": "matrix",
            "dimension": 1,
            "operator": {"modes": [{"freq": 0.0, "cos": [[-1.0]]}]},
            "nonlinearity": {"terms": []},
            "initial": [1.0],
            "horizon": 1.0,
        }
        cfg = write_config(tmp_path, problem=raw_problem)
        assert main(["average", str(cfg)]) == 0
        out = capsys.readouterr().out
        assert "A_hat" in out
        assert "satisfied" in out

    def test_oscillatory_family_violates(self, tmp_path, capsys):
        cfg = write_config(tmp_path)
        assert main(["average", str(cfg)]) == 0
        assert "violated" in capsys.readouterr().out


class TestCheckCommand:
    def test_check_writes_json(self, tmp_path, capsys):
        cfg = write_config(tmp_path, checks=["stability", "h5", "perturbation"])
        code = main(["check", str(cfg), "--out", str(tmp_path / "out")])
        assert code == 0
        payload = json.loads((tmp_path / "out" / "mini_checks.json").read_text())
        assert set(payload) == {"stability", "h5", "perturbation"}
        assert payload["perturbation"]["violations"] == 0

    def test_check_without_configured_checks_fails_validation(self, tmp_path):
        cfg = write_config(tmp_path, checks=[])
        assert main(["check", str(cfg)]) == 1


class TestValidationFailures:
    def test_malformed_config_exits_one_without_outputs(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        out = tmp_path / "out"
        assert main(["sweep", str(bad), "--out", str(out)]) == 1
        assert not out.exists()

    def test_schema_violation_exits_one(self, tmp_path):
        cfg = write_config(tmp_path, lambdas=[0.25, 0.5])
        assert main(["sweep", str(cfg)]) == 1

    def test_unknown_subcommand_exits_one(self, capsys):
        assert main(["frobnicate", "x.json"]) == 1
        assert "usage" in capsys.readouterr().err

    def test_missing_subcommand_exits_one(self):
        assert main([]) == 1

    def test_bad_lambda_override(self, tmp_path):
        cfg = write_config(tmp_path)
        assert main(["sweep", str(cfg), "--lambda", "0.1,0.2"]) == 1

    def test_missing_config_file(self, tmp_path):
        assert main(["sweep", str(tmp_path / "absent.json")]) == 1


class TestNumericalFailures:
    def test_escape_in_solve_exits_two(self, tmp_path):
        raw_problem = {
            "kind": "matrix",
            "dimension": 1,
            "operator": {"modes": [{"freq": 0.0, "cos": [[0.0]]}]},
            "nonlinearity": {
                "terms": [
                    {
                        "weight": {"modes": [{"freq": 0.0, "cos": 1.0}]},
                        "envelope": {"kind": "none"},
                        "map": {"kind": "quadratic"},
                    }
                ]
            },
            "initial": [5.0],
            "horizon": 2.0,
        }
        cfg = write_config(tmp_path, problem=raw_problem, lambdas=[], checks=[])
        assert main(["solve", str(cfg), "--out", str(tmp_path / "out")]) == 2

    def test_sweep_with_escapes_exits_two(self, tmp_path):
        raw_problem = {
            "kind": "matrix",
            "dimension": 1,
            "operator": {"modes": [{"freq": 0.0, "cos": [[0.0]]}]},
            "nonlinearity": {
                "terms": [
                    {
                        "weight": {"modes": [{"freq": 1.0, "cos": 3.0}]},
                        "envelope": {"kind": "none"},
                        "map": {"kind": "quadratic"},
                    }
                ]
            },
            "initial": [5.0],
            "horizon": 3.0,
        }
        cfg = write_config(tmp_path, problem=raw_problem)
        assert main(["sweep", str(cfg), "--out", str(tmp_path / "out")]) == 2


class TestEntryPoint:
    def test_console_script_runs(self, tmp_path):
        cfg = write_config(tmp_path)
        result = subprocess.run(
            [sys.executable, "-m", "oscavg.cli", "sweep", str(cfg), "--out", str(tmp_path / "out")],
            capture_output=True,
            text=True,
        )
        assert result.returncode == 0
        assert (tmp_path / "out" / "mini.csv").exists()

    def test_output_env_variable(self, tmp_path, monkeypatch):
        cfg = write_config(tmp_path)
        target = tmp_path / "envout"
        monkeypatch.setenv("OSCAVG_OUT", str(target))
        assert main(["sweep", str(cfg)]) == 0
        assert (target / "mini.csv").exists()
