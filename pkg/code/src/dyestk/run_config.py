"""
Run configuration: a strict JSON schema with defaults, parsed into validated in-memory objects.

    {
      "problem":    {"name": ..., <problem parameters>},
      "splitting":  {"gamma": ..., "alpha": ..., "mode": ..., "q_at_z": ...},
      "start":      {"kind": "point" | "uniform" | "gaussian", "z0": [...], "lo", "hi", "mean", "sigma"},
      "stop":       {"tol", "max_iter", "escape_radius"},
      "output":     {"trajectory_csv", "envelope_csv", "trials_csv", "per_trial_csv", "grid": {"lo", "hi", "points"}},
      "experiment": {"trials", "init": {...}, "saddles", "minimizers", "delta_saddle", "delta_min",
                     "tol", "max_iter", "escape_radius", "discover", "discover_grid": {"lo", "hi", "points"}},
      "check":      {"samples", "grid": {"lo", "hi", "points"}},
      "seed":       <unsigned 64-bit integer>
    }
"""
import copy
import logging
from dataclasses import dataclass, replace

import numpy as np

from config_parser import load_json_text
from dyestk.analysis import default_alpha
from dyestk.constants import DEFAULT_TOL, DEFAULT_MAX_ITER, DEFAULT_ESCAPE_RADIUS, DEFAULT_DELTA_SADDLE, \
    DEFAULT_DELTA_MIN, MC_ESCAPE_RADIUS
from dyestk.exceptions import SchemaError, BadParams
from dyestk.functions import ProblemTriple
from dyestk.id_gen import trial_generator
from dyestk.registry import registry_make
from dyestk.saddle_lab import InitSpec, McConfig, INIT_KINDS
from dyestk.splitting import SplitParams, validate_params, MODES

log = logging.getLogger(__name__)

SEED_LIMIT = 1 << 64

BUILTIN_DEFAULTS = {
    "start": {"kind": "uniform", "lo": -1.0, "hi": 1.0, "mean": 0.0, "sigma": 1.0},
    "stop": {"tol": DEFAULT_TOL, "max_iter": DEFAULT_MAX_ITER, "escape_radius": DEFAULT_ESCAPE_RADIUS},
    "output": {"trajectory_csv": "trajectory.csv", "envelope_csv": "envelope.csv", "trials_csv": "trials.csv",
               "per_trial_csv": False, "grid": {"lo": -2.0, "hi": 2.0, "points": 41}},
    "experiment": {"trials": 1000, "init": {"kind": "uniform", "lo": -1.0, "hi": 1.0, "mean": 0.0, "sigma": 1.0},
                   "delta_saddle": DEFAULT_DELTA_SADDLE, "delta_min": DEFAULT_DELTA_MIN, "tol": DEFAULT_TOL,
                   "max_iter": 10000, "escape_radius": MC_ESCAPE_RADIUS, "discover": False,
                   "discover_grid": {"lo": -2.0, "hi": 2.0, "points": 5}},
    "check": {"samples": 100, "grid": {"lo": -2.0, "hi": 2.0, "points": 81}},
    "seed": 0,
}


def merge_defaults(defaults: dict, doc: dict) -> dict:
    """
    Deep merge: values of doc override defaults, nested blocks are merged key by key.
    """
    merged = copy.deepcopy(defaults)
    for k, v in doc.items():
        if isinstance(v, dict) and isinstance(merged.get(k), dict):
            merged[k] = merge_defaults(merged[k], v)
        else:
            merged[k] = copy.deepcopy(v)
    return merged


class _Block:
    """
    Typed access to one block of the document. Every key must be consumed before finish().
    """

    def __init__(self, data, path: str):
        if not isinstance(data, dict):
            raise SchemaError(path, "must be an object")
        self._data = dict(data)
        self._path = path
        self._seen = set()

    def key(self, name: str) -> str:
        return "%s.%s" % (self._path, name) if self._path else name

    def has(self, name: str) -> bool:
        return name in self._data

    def raw(self, name: str, default=None):
        self._seen.add(name)
        return self._data.get(name, default)

    def number(self, name: str, default=None, positive: bool = False, non_negative: bool = False,
               integer: bool = False):
        value = self.raw(name, default)
        if value is None:
            return None
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise SchemaError(self.key(name), "must be a number")
        if integer and (not float(value).is_integer()):
            raise SchemaError(self.key(name), "must be an integer")
        if positive and not value > 0:
            raise SchemaError(self.key(name), "must be positive, got %r" % value)
        if non_negative and value < 0:
            raise SchemaError(self.key(name), "must be non-negative, got %r" % value)
        return int(value) if integer else float(value)

    def boolean(self, name: str, default: bool = False) -> bool:
        value = self.raw(name, default)
        if not isinstance(value, bool):
            raise SchemaError(self.key(name), "must be true or false")
        return value

    def string(self, name: str, default: str = None, choices=None) -> str:
        value = self.raw(name, default)
        if value is None:
            return None
        if not isinstance(value, str):
            raise SchemaError(self.key(name), "must be a string")
        if choices is not None and value not in choices:
            raise SchemaError(self.key(name), "must be one of %s" % ", ".join(choices))
        return value

    def vector(self, name: str, default=None):
        value = self.raw(name, default)
        if value is None:
            return None
        if not isinstance(value, list) or not all(isinstance(v, (int, float)) and not isinstance(v, bool)
                                                  for v in value):
            raise SchemaError(self.key(name), "must be a list of numbers")
        return tuple(float(v) for v in value)

    def vectors(self, name: str):
        value = self.raw(name)
        if value is None:
            return None
        if not isinstance(value, list):
            raise SchemaError(self.key(name), "must be a list of points")
        points = []
        for i, point in enumerate(value):
            if not isinstance(point, list) or not all(isinstance(v, (int, float)) and not isinstance(v, bool)
                                                      for v in point):
                raise SchemaError("%s[%d]" % (self.key(name), i), "must be a list of numbers")
            points.append(tuple(float(v) for v in point))
        return tuple(points)

    def block(self, name: str) -> "_Block":
        return _Block(self.raw(name, {}), self.key(name))

    def rest(self) -> dict:
        """
        Consume and return every key not yet read.
        """
        remaining = {k: v for k, v in self._data.items() if k not in self._seen}
        self._seen.update(remaining)
        return remaining

    def finish(self) -> None:
        unknown = sorted(set(self._data) - self._seen)
        if unknown:
            raise SchemaError(self.key(unknown[0]), "unknown key (unknown: %s)" % ", ".join(unknown))


@dataclass(frozen=True)
class GridSpec:
    lo: float
    hi: float
    points: int


@dataclass(frozen=True)
class StopSpec:
    tol: float
    max_iter: int
    escape_radius: float


@dataclass(frozen=True)
class OutputSpec:
    trajectory_csv: str
    envelope_csv: str
    trials_csv: str
    per_trial_csv: bool
    grid: GridSpec


@dataclass(frozen=True)
class ExperimentSpec:
    trials: int
    init: InitSpec
    saddles: tuple
    minimizers: tuple
    delta_saddle: float
    delta_min: float
    tol: float
    max_iter: int
    escape_radius: float
    discover: bool
    discover_grid: GridSpec


@dataclass(frozen=True)
class CheckSpec:
    samples: int
    grid: GridSpec


@dataclass(frozen=True)
class RunConfig:
    problem_name: str
    problem_params: dict
    problem: ProblemTriple
    split: SplitParams
    start: InitSpec
    stop: StopSpec
    output: OutputSpec
    experiment: ExperimentSpec
    check: CheckSpec
    seed: int
    document: dict

    def with_seed(self, seed: int) -> "RunConfig":
        document = dict(self.document, seed=seed)
        return replace(self, seed=_check_seed(seed, "seed"), document=document)

    def with_q_at_z(self, q_at_z: bool) -> "RunConfig":
        document = merge_defaults(self.document, {"splitting": {"q_at_z": q_at_z}})
        return replace(self, split=replace(self.split, q_at_z=q_at_z), document=document)

    def mc_config(self, saddles=None, minimizers=None) -> McConfig:
        """
        Experiment settings as a McConfig. Explicit attractor lists override the configured ones.
        """
        exp = self.experiment
        return McConfig(problem_name=self.problem_name, problem_params=dict(self.problem_params), split=self.split,
                        trials=exp.trials, seed=self.seed, init=exp.init,
                        saddles=exp.saddles if saddles is None else tuple(tuple(p) for p in saddles),
                        minimizers=exp.minimizers if minimizers is None else tuple(tuple(p) for p in minimizers),
                        delta_saddle=exp.delta_saddle, delta_min=exp.delta_min, tol=exp.tol,
                        max_iter=exp.max_iter, escape_radius=exp.escape_radius)


def _check_seed(value, key: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int) or not 0 <= value < SEED_LIMIT:
        raise SchemaError(key, "must be an unsigned 64-bit integer")
    return value


def _grid(block: _Block) -> GridSpec:
    grid = GridSpec(lo=block.number("lo", -2.0), hi=block.number("hi", 2.0),
                    points=block.number("points", 41, positive=True, integer=True))
    block.finish()
    if not grid.lo < grid.hi:
        raise SchemaError(block.key("hi"), "grid needs lo < hi")
    return grid


def _init(block: _Block, point_key: str) -> InitSpec:
    kind = block.string("kind", "uniform", choices=INIT_KINDS)
    init = InitSpec(kind=kind, lo=block.number("lo", -1.0), hi=block.number("hi", 1.0),
                    mean=block.number("mean", 0.0), sigma=block.number("sigma", 1.0, positive=True),
                    point=block.vector(point_key))
    block.finish()
    if kind == "uniform" and not init.lo < init.hi:
        raise SchemaError(block.key("hi"), "uniform box needs lo < hi")
    if kind == "point" and init.point is None:
        raise SchemaError(block.key(point_key), "required when kind is point")
    return init


def _problem(block: _Block):
    name = block.string("name")
    if name is None:
        raise SchemaError(block.key("name"), "problem name is required")
    params = block.rest()
    try:
        problem = registry_make(name, params)
    except BadParams as e:
        if e.key is not None:
            raise SchemaError(block.key(e.key), e.message)
        raise
    return name, params, problem


def build_run_config(doc: dict, defaults: dict = None) -> RunConfig:
    """
    Validate a parsed document against the schema.
    :param doc: Parsed JSON document.
    :param defaults: Defaults document. Built-in defaults are used when None.
    :return: RunConfig
    """
    if not isinstance(doc, dict):
        raise SchemaError("(root)", "config must be a JSON object")
    for required in ("problem", "splitting"):
        if required not in doc:
            raise SchemaError(required, "required block is missing")
    merged = merge_defaults(BUILTIN_DEFAULTS if defaults is None else merge_defaults(BUILTIN_DEFAULTS, defaults),
                            doc)
    # A start point given without a kind means kind "point".
    if isinstance(doc.get("start"), dict) and "z0" in doc["start"] and "kind" not in doc["start"]:
        merged["start"]["kind"] = "point"
    init = doc.get("experiment", {}).get("init") if isinstance(doc.get("experiment"), dict) else None
    if isinstance(init, dict) and "point" in init and "kind" not in init:
        merged["experiment"]["init"]["kind"] = "point"
    root = _Block(merged, "")

    name, problem_params, problem = _problem(root.block("problem"))

    splitting = root.block("splitting")
    gamma = splitting.number("gamma", positive=True)
    alpha = splitting.number("alpha", positive=True)
    mode = splitting.string("mode", None, choices=MODES)
    q_at_z = splitting.boolean("q_at_z", False)
    splitting.finish()
    if gamma is None:
        raise SchemaError(splitting.key("gamma"), "required")
    if alpha is None:
        alpha = default_alpha(problem, gamma, mode)
        log.info("alpha not set; using %g", alpha)
    split = validate_params(problem, SplitParams(gamma=gamma, alpha=alpha, mode=mode, q_at_z=q_at_z))

    start_block = root.block("start")
    start = _init(start_block, "z0")
    if start.kind == "point" and len(start.point) != problem.dimension:
        raise SchemaError(start_block.key("z0"), "must have %d entries" % problem.dimension)

    stop_block = root.block("stop")
    stop = StopSpec(tol=stop_block.number("tol", positive=True),
                    max_iter=stop_block.number("max_iter", non_negative=True, integer=True),
                    escape_radius=stop_block.number("escape_radius", positive=True))
    stop_block.finish()

    out_block = root.block("output")
    output = OutputSpec(trajectory_csv=out_block.string("trajectory_csv"),
                        envelope_csv=out_block.string("envelope_csv"),
                        trials_csv=out_block.string("trials_csv"),
                        per_trial_csv=out_block.boolean("per_trial_csv"),
                        grid=_grid(out_block.block("grid")))
    out_block.finish()

    exp_block = root.block("experiment")
    experiment = ExperimentSpec(trials=exp_block.number("trials", positive=True, integer=True),
                                init=_init(exp_block.block("init"), "point"),
                                saddles=exp_block.vectors("saddles"),
                                minimizers=exp_block.vectors("minimizers"),
                                delta_saddle=exp_block.number("delta_saddle", positive=True),
                                delta_min=exp_block.number("delta_min", positive=True),
                                tol=exp_block.number("tol", positive=True),
                                max_iter=exp_block.number("max_iter", non_negative=True, integer=True),
                                escape_radius=exp_block.number("escape_radius", positive=True),
                                discover=exp_block.boolean("discover"),
                                discover_grid=_grid(exp_block.block("discover_grid")))
    exp_block.finish()

    check_block = root.block("check")
    check = CheckSpec(samples=check_block.number("samples", positive=True, integer=True),
                      grid=_grid(check_block.block("grid")))
    check_block.finish()

    seed = _check_seed(root.raw("seed"), "seed")
    root.finish()
    return RunConfig(problem_name=name, problem_params=problem_params, problem=problem, split=split, start=start,
                     stop=stop, output=output, experiment=experiment, check=check, seed=seed, document=merged)


def parse_config(text: str, defaults: dict = None) -> RunConfig:
    """
    Strictly parse a JSON run configuration.
    :param text: Document text.
    :param defaults: Defaults document (conf/dye/defaults.json). Built-in defaults are used when None.
    :return: RunConfig
    :raises ParseError: on malformed JSON, with its line number.
    :raises SchemaError: on unknown keys or out-of-range values, naming the dotted key.
    """
    return build_run_config(load_json_text(text), defaults)


def start_point(config: RunConfig) -> np.ndarray:
    """
    Starting point of `solve`: the configured z0, or a draw from the start distribution keyed by the seed.
    """
    return config.start.sample(trial_generator(config.seed, 0), config.problem.dimension)
