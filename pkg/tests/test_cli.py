import json
import os.path as osp

import pytest

import dye
from dyestk.exceptions import EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_INVARIANT
from dyestk.json_util import read_trajectory_csv

ROOT = osp.dirname(osp.dirname(osp.abspath(__file__)))
DEFAULTS = osp.join(ROOT, "conf", "dye", "defaults.json")
EXAMPLES = osp.join(ROOT, "conf", "dye", "examples")


def _main(command: str, config: str, out, *extra) -> int:
    return dye.main([command, "--config", config, "--out", str(out), "--defaults", DEFAULTS] + list(extra))


def _write_config(tmp_path, doc: dict, name: str = "config.json") -> str:
    path = str(tmp_path / name)
    with open(path, "w") as f:
        json.dump(doc, f)
    return path


def _load(path) -> dict:
    with open(str(path)) as f:
        return json.load(f)


def test_bounds(tmp_path):
    assert _main("bounds", osp.join(EXAMPLES, "bounds_drs.json"), tmp_path) == EXIT_OK
    report = _load(tmp_path / "bounds.json")
    assert report["mode"] == "DRS"
    assert report["alpha1"] == pytest.approx(6.05, abs=1e-4)
    assert report["alpha2"] is None
    assert report["command"] == "bounds"
    assert osp.exists(str(tmp_path / "log.out"))


def test_solve_zero(tmp_path):
    assert _main("solve", osp.join(EXAMPLES, "solve_zero.json"), tmp_path) == EXIT_OK
    report = _load(tmp_path / "solve.json")
    assert report["status"] == "converged"
    assert report["iterations"] == 0
    assert report["mode"] == "DYS"
    assert report["local_smoothness"]
    rows = read_trajectory_csv(str(tmp_path / "trajectory.csv"))
    assert len(rows) == 1
    assert rows[0]["resid"] == 0.0


def test_seed_flag_is_reproducible(tmp_path):
    config = osp.join(EXAMPLES, "solve_zero.json")
    _main("solve", config, tmp_path / "a", "--seed", "99")
    _main("solve", config, tmp_path / "b", "--seed", "99")
    first, second = _load(tmp_path / "a" / "solve.json"), _load(tmp_path / "b" / "solve.json")
    assert first["seed"] == second["seed"] == 99
    assert first["z0"] == second["z0"]
    assert first["run_id"] == second["run_id"]


def test_check_quadratic(tmp_path):
    assert _main("check", osp.join(EXAMPLES, "check_quadratic.json"), tmp_path) == EXIT_OK
    report = _load(tmp_path / "check.json")
    assert report["passed"]
    assert {"equivalence", "sandwich", "gradient_fd", "reductions"} <= {c["name"] for c in report["checks"]}


def test_envelope_grid(tmp_path):
    doc = {"problem": {"name": "saddle_quadratic", "d": [1.0, -1.0]},
           "splitting": {"gamma": 0.5, "alpha": 1.0, "mode": "FBS"},
           "output": {"grid": {"lo": -1.0, "hi": 1.0, "points": 5}}}
    assert _main("envelope", _write_config(tmp_path, doc), tmp_path) == EXIT_OK
    with open(str(tmp_path / "envelope.csv")) as f:
        lines = f.read().splitlines()
    assert lines[0] == "z_0,z_1,envelope,grad_norm"
    assert len(lines) == 1 + 25


def test_envelope_echoes_seed(tmp_path):
    doc = {"problem": {"name": "saddle_quadratic", "d": [1.0, -1.0]},
           "splitting": {"gamma": 0.5, "alpha": 1.0, "mode": "FBS"},
           "output": {"grid": {"lo": -1.0, "hi": 1.0, "points": 3}}, "seed": 3}
    assert _main("envelope", _write_config(tmp_path, doc), tmp_path, "--seed", "41") == EXIT_OK
    report = _load(tmp_path / "envelope.json")
    assert report["command"] == "envelope"
    assert report["seed"] == 41
    assert report["evaluations"] == 9
    assert report["grid"] == {"lo": -1.0, "hi": 1.0, "points": 3}


def test_envelope_rejects_high_dimension(tmp_path):
    doc = {"problem": {"name": "zero", "n": 3}, "splitting": {"gamma": 0.5, "alpha": 1.0}}
    assert _main("envelope", _write_config(tmp_path, doc), tmp_path) == EXIT_CONFIG


def test_saddle_mc(tmp_path):
    doc = {"problem": {"name": "saddle_quadratic", "d": [1.0, -1.0]},
           "splitting": {"gamma": 0.5, "alpha": 2.7, "mode": "FBS"},
           "experiment": {"trials": 50}, "output": {"per_trial_csv": True}, "seed": 5}
    assert _main("saddle-mc", _write_config(tmp_path, doc), tmp_path) == EXIT_OK
    report = _load(tmp_path / "saddle_mc.json")
    assert report["trials"] == 50
    assert report["to_saddle"] == 0
    assert report["seed"] == 5
    assert report["command"] == "saddle-mc"
    with open(str(tmp_path / "trials.csv")) as f:
        assert len(f.read().splitlines()) == 51


def test_config_errors(tmp_path):
    assert _main("solve", str(tmp_path / "missing.json"), tmp_path) == EXIT_CONFIG

    bad = {"problem": {"name": "zero"}, "splitting": {"gamma": -0.5, "alpha": 1.0}}
    assert _main("solve", _write_config(tmp_path, bad), tmp_path) == EXIT_CONFIG

    with open(str(tmp_path / "broken.json"), "w") as f:
        f.write("{\n  \"problem\": \n}")
    assert _main("solve", str(tmp_path / "broken.json"), tmp_path) == EXIT_CONFIG


def test_failed_check_exit_code(tmp_path, monkeypatch):
    from dyestk import invariants

    def failing_suite(*args, **kwargs):
        return [invariants.CheckResult(name="forced", status=invariants.FAIL, value=1.0, threshold=0.0)]

    monkeypatch.setattr(invariants, "run_suite", failing_suite)
    doc = {"problem": {"name": "zero"}, "splitting": {"gamma": 0.5, "alpha": 1.0}}
    assert _main("check", _write_config(tmp_path, doc), tmp_path) == EXIT_INVARIANT
    assert _load(tmp_path / "check.json")["passed"] is False


def test_unexpected_error_exit_code(tmp_path, monkeypatch):
    def broken_evaluate(*args, **kwargs):
        raise ValueError("array must not contain infs or NaNs")

    monkeypatch.setattr(dye, "evaluate", broken_evaluate)
    doc = {"problem": {"name": "saddle_quadratic", "d": [1.0, -1.0]},
           "splitting": {"gamma": 0.5, "alpha": 1.0, "mode": "FBS"},
           "output": {"grid": {"lo": -1.0, "hi": 1.0, "points": 3}}}
    assert _main("envelope", _write_config(tmp_path, doc), tmp_path) == EXIT_NUMERICAL


def test_saddle_mc_discovery_rejects_unclassified_points(tmp_path):
    doc = {"problem": {"name": "matfac_toy", "radius": 0.5},
           "splitting": {"gamma": 0.15, "alpha": 1.0, "mode": "FBS"},
           "experiment": {"trials": 5, "discover": True}, "seed": 5}
    assert _main("saddle-mc", _write_config(tmp_path, doc), tmp_path) == EXIT_CONFIG
