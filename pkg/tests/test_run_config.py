import json

import numpy as np
import pytest

from config_parser import load_json_text
from dyestk.exceptions import ParseError, SchemaError, UnknownProblem, GammaOutOfRange
from dyestk.run_config import parse_config, merge_defaults, start_point, BUILTIN_DEFAULTS

MINIMAL = {"problem": {"name": "zero", "n": 2}, "splitting": {"gamma": 0.5, "alpha": 1.0}}


def _doc(**overrides) -> str:
    return json.dumps(merge_defaults(MINIMAL, overrides))


def test_minimal_config():
    config = parse_config(json.dumps(MINIMAL))
    assert config.problem_name == "zero"
    assert config.problem.dimension == 2
    assert config.split.gamma == 0.5
    assert config.split.alpha == 1.0
    assert config.split.mode == "DYS"
    assert config.split.validated
    assert config.stop.tol == BUILTIN_DEFAULTS["stop"]["tol"]
    assert config.experiment.trials == 1000
    assert config.check.grid.points == 81
    assert config.seed == 0


def test_defaults_document_overrides_builtin():
    config = parse_config(json.dumps(MINIMAL), defaults={"stop": {"max_iter": 50}, "seed": 3})
    assert config.stop.max_iter == 50
    assert config.stop.tol == BUILTIN_DEFAULTS["stop"]["tol"]
    assert config.seed == 3


def test_schema_errors():
    with pytest.raises(SchemaError) as e:
        parse_config(_doc(splitting={"gamma": -1.0}))
    assert e.value.key == "splitting.gamma"

    doc = {"problem": {"name": "zero"}, "splitting": {"gama": 0.5, "alpha": 1.0}}
    with pytest.raises(SchemaError) as e:
        parse_config(json.dumps(doc))
    assert "gama" in str(e.value)

    with pytest.raises(SchemaError) as e:
        parse_config(_doc(stop={"max_iterations": 10}))
    assert e.value.key == "stop.max_iterations"

    with pytest.raises(SchemaError) as e:
        parse_config(_doc(problem={"n": 0}))
    assert e.value.key == "problem.n"

    with pytest.raises(SchemaError):
        parse_config(json.dumps({"problem": {"name": "zero"}}))
    with pytest.raises(SchemaError):
        parse_config(_doc(seed=-1))
    with pytest.raises(SchemaError):
        parse_config(_doc(seed=1 << 64))
    with pytest.raises(SchemaError):
        parse_config(_doc(start={"z0": [1.0]}))


def test_parse_errors():
    with pytest.raises(ParseError) as e:
        parse_config('{\n  "problem": {"name": "zero"},\n  "splitting": {"gamma": 0.5,,}\n}')
    assert e.value.line == 3
    with pytest.raises(SchemaError):
        load_json_text('{"seed": 1, "seed": 2}')
    with pytest.raises(SchemaError):
        load_json_text('{"seed": NaN}')


def test_problem_and_parameter_errors():
    with pytest.raises(UnknownProblem):
        parse_config(_doc(problem={"name": "banana"}))
    with pytest.raises(GammaOutOfRange):
        parse_config(json.dumps({"problem": {"name": "quadratic", "Q": [2.0, 4.0]},
                                 "splitting": {"gamma": 0.3, "alpha": 1.0}}))


def test_alpha_defaults_from_bounds():
    doc = {"problem": {"name": "saddle_quadratic"}, "splitting": {"gamma": 0.5, "mode": "FBS"}}
    config = parse_config(json.dumps(doc))
    assert config.split.alpha == pytest.approx(0.9)
    assert config.split.mode == "FBS"


def test_start_point():
    config = parse_config(_doc(start={"z0": [0.5, -0.5]}))
    assert config.start.kind == "point"
    assert np.allclose(start_point(config), [0.5, -0.5])

    config = parse_config(_doc(seed=42))
    first = start_point(config)
    assert np.array_equal(first, start_point(config))
    assert np.all(np.abs(first) <= 1.0)


def test_overrides():
    config = parse_config(json.dumps(MINIMAL))
    seeded = config.with_seed(17)
    assert seeded.seed == 17
    assert seeded.document["seed"] == 17
    flagged = config.with_q_at_z(True)
    assert flagged.split.q_at_z
    assert flagged.document["splitting"]["q_at_z"]
    assert not config.split.q_at_z


def test_mc_config():
    doc = {"problem": {"name": "saddle_quadratic"}, "splitting": {"gamma": 0.5, "alpha": 2.7, "mode": "FBS"},
           "experiment": {"trials": 20, "init": {"kind": "gaussian", "sigma": 0.1}, "saddles": [[0.0, 0.0]]},
           "seed": 5}
    cfg = parse_config(json.dumps(doc)).mc_config()
    assert cfg.trials == 20
    assert cfg.seed == 5
    assert cfg.init.kind == "gaussian"
    assert cfg.saddles == ((0.0, 0.0),)
    assert cfg.minimizers is None
    assert cfg.split.alpha == 2.7

    explicit = parse_config(json.dumps(doc)).mc_config(minimizers=[np.array([1.0, 0.0])])
    assert explicit.minimizers == ((1.0, 0.0),)
