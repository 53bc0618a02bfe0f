import json
import math
import os

import numpy as np
import pytest

from dyestk.exceptions import NonFiniteValue
from dyestk.json_util import to_jsonable, dumps_report, write_json, atomic_write_text, write_trajectory_csv, \
    read_trajectory_csv
from dyestk.registry import registry_make
from dyestk.splitting import SplitParams, run


def test_to_jsonable():
    report = {"alpha1": math.inf, "values": np.array([1.0, 2.0]), "flag": np.bool_(True), "count": np.int64(3)}
    assert to_jsonable(report) == {"alpha1": None, "values": [1.0, 2.0], "flag": True, "count": 3}
    with pytest.raises(NonFiniteValue):
        dumps_report({"bad": float("nan")})


def test_write_json(tmp_path):
    path = str(tmp_path / "nested" / "report.json")
    write_json(path, {"gamma": 0.5, "bound": -math.inf})
    with open(path) as f:
        assert json.load(f) == {"gamma": 0.5, "bound": None}
    assert [name for name in os.listdir(tmp_path / "nested") if name.startswith(".tmp_")] == []


def test_atomic_write_replaces(tmp_path):
    path = str(tmp_path / "out.txt")
    atomic_write_text(path, "first")
    atomic_write_text(path, "second")
    with open(path) as f:
        assert f.read() == "second"


def test_trajectory_csv(tmp_path):
    problem = registry_make("saddle_quadratic", {"d": [1.0, -1.0]})
    trajectory = run(problem, SplitParams(gamma=0.5, alpha=2.7, mode="FBS"), np.array([0.25, 0.5]), max_iter=5,
                     escape_radius=None)
    path = str(tmp_path / "trajectory.csv")
    write_trajectory_csv(path, trajectory, 2)
    rows = read_trajectory_csv(path)
    assert len(rows) == len(trajectory.records) == 6
    assert [r["iter"] for r in rows] == list(range(6))
    for row, record in zip(rows, trajectory.records):
        assert row["z_0"] == record.z[0]
        assert row["z_1"] == record.z[1]
        assert row["resid"] == record.residual
