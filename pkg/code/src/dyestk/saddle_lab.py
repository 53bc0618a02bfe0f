"""
Monte-Carlo strict-saddle avoidance experiments for DRS and FBS, and a multistart search for critical points.

Each trial draws z0 from its own counter-based stream keyed by (seed, trial), runs the splitting
iteration and labels prox_{gamma g}(z_final) by the nearest declared saddle or minimizer. Results are
independent of the worker count.
"""
import itertools
import logging
import multiprocessing as mp
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.optimize

from dyestk.analysis import classify, step_bounds, jacobian_T, ENV_STRICT_SADDLE, ENV_LOCAL_MIN
from dyestk.constants import DEFAULT_DELTA_SADDLE, DEFAULT_DELTA_MIN, MC_ESCAPE_RADIUS, DEFAULT_TOL, CLUSTER_RADIUS, \
    DISCOVERY_RESIDUAL_TOL, DISCOVERY_POLISH_STEPS
from dyestk.exceptions import BadConfig, ModeMismatch, NumericalError, DyeError, InvariantViolation, SingularMatrix
from dyestk.functions import ProblemTriple
from dyestk.id_gen import trial_generator
from dyestk.linalg import solve_linear
from dyestk.registry import registry_make
from dyestk.splitting import SplitParams, ensure_validated, run, dys_step, STATUS_ESCAPED
from dyestk.util import nearest_point, cluster_points

log = logging.getLogger(__name__)

LABEL_MIN = "ConvergedToMin"
LABEL_SADDLE = "ConvergedToSaddle"
LABEL_OTHER = "ConvergedToOther"
LABEL_NOT_CONVERGED = "NotConverged"
LABEL_ESCAPED = "Escaped"

INIT_KINDS = ("uniform", "gaussian", "point")


@dataclass(frozen=True)
class InitSpec:
    """
    Distribution of starting points: uniform box [lo, hi]^n, gaussian(mean, sigma) or a fixed point.
    """
    kind: str = "uniform"
    lo: float = -1.0
    hi: float = 1.0
    mean: float = 0.0
    sigma: float = 1.0
    point: tuple = None

    def sample(self, rng: np.random.Generator, dim: int) -> np.ndarray:
        if self.kind == "uniform":
            return rng.uniform(self.lo, self.hi, dim)
        if self.kind == "gaussian":
            return self.mean + self.sigma * rng.standard_normal(dim)
        return np.array(self.point, dtype=float)

    def check(self, dim: int) -> None:
        if self.kind not in INIT_KINDS:
            raise BadConfig("init kind must be one of %s, got '%s'" % (", ".join(INIT_KINDS), self.kind))
        if self.kind == "uniform" and not self.lo < self.hi:
            raise BadConfig("uniform init box needs lo < hi")
        if self.kind == "gaussian" and not self.sigma > 0:
            raise BadConfig("gaussian init needs sigma > 0")
        if self.kind == "point" and (self.point is None or len(self.point) != dim):
            raise BadConfig("point init needs a start of dimension %d" % dim)


@dataclass(frozen=True)
class McConfig:
    problem_name: str
    problem_params: dict
    split: SplitParams
    trials: int
    seed: int
    init: InitSpec = InitSpec()
    saddles: tuple = None
    minimizers: tuple = None
    delta_saddle: float = DEFAULT_DELTA_SADDLE
    delta_min: float = DEFAULT_DELTA_MIN
    tol: float = DEFAULT_TOL
    max_iter: int = 10000
    escape_radius: float = MC_ESCAPE_RADIUS


@dataclass(frozen=True)
class TrialResult:
    trial: int
    z0: tuple
    label: str
    index: int
    x_final: tuple
    iterations: int
    residual: float
    error: str = None


@dataclass
class McOutcome:
    seed: int
    results: list = field(default_factory=list)
    saddles: list = field(default_factory=list)
    minimizers: list = field(default_factory=list)

    @property
    def trials(self) -> int:
        return len(self.results)

    def count(self, label: str) -> int:
        return sum(1 for r in self.results if r.label == label)

    def summary(self) -> dict:
        return {"trials": self.trials, "to_min": self.count(LABEL_MIN), "to_saddle": self.count(LABEL_SADDLE),
                "to_other": self.count(LABEL_OTHER), "not_converged": self.count(LABEL_NOT_CONVERGED),
                "escaped": self.count(LABEL_ESCAPED), "seed": self.seed}


def _as_points(points) -> list:
    return [np.asarray(p, dtype=float) for p in (points or [])]


def resolve_attractors(cfg: McConfig, problem: ProblemTriple):
    """
    Saddle and minimizer lists: those of the config, else the problem's known landmarks.
    """
    saddles, minimizers = _as_points(cfg.saddles), _as_points(cfg.minimizers)
    landmarks = problem.landmarks
    if cfg.saddles is None and landmarks is not None:
        saddles = list(landmarks.saddles)
    if cfg.minimizers is None and landmarks is not None:
        minimizers = list(landmarks.minimizers)
    return saddles, minimizers


def check_mc_config(cfg: McConfig, problem: ProblemTriple, saddles: list, minimizers: list) -> SplitParams:
    """
    Validate an experiment against its problem.
    :return: Validated splitting parameters.
    """
    if cfg.trials < 1:
        raise BadConfig("trial count must be at least 1, got %d" % cfg.trials)
    if not (cfg.delta_saddle > 0 and cfg.delta_min > 0):
        raise BadConfig("delta_saddle and delta_min must be positive")
    if cfg.tol <= 0 or cfg.max_iter < 0:
        raise BadConfig("stop criteria need tol > 0 and max_iter >= 0")
    cfg.init.check(problem.dimension)
    for point in saddles + minimizers:
        if point.shape != (problem.dimension,):
            raise BadConfig("attractor %s does not live in R^%d" % (point.tolist(), problem.dimension))
    for s in saddles:
        for m in minimizers:
            if np.linalg.norm(s - m) <= cfg.delta_saddle + cfg.delta_min:
                raise BadConfig("saddle %s and minimizer %s overlap at the declared radii" % (s.tolist(), m.tolist()))

    params = ensure_validated(problem, cfg.split)
    if not params.local_smoothness:
        raise BadConfig("avoidance experiments need gamma L_f < 1, got gamma=%r with L_f=%r on %s"
                        % (params.gamma, problem.L_f, problem.name))
    try:
        bounds = step_bounds(problem, params)
    except ModeMismatch:
        raise BadConfig("avoidance experiments need a DRS (h = 0) or FBS (g = 0) splitting, got %s on %s"
                        % (params.mode, problem.name))
    if not bounds.alpha_admissible:
        raise BadConfig("alpha=%r is not below the %s bound %r" % (params.alpha, params.mode, bounds.bound))
    return params


def label_point(x: np.ndarray, saddles: list, minimizers: list, delta_saddle: float, delta_min: float):
    """
    :return: (label, index) for a converged terminal point.
    """
    index, distance = nearest_point(x, saddles)
    if index is not None and distance <= delta_saddle:
        return LABEL_SADDLE, index
    index, distance = nearest_point(x, minimizers)
    if index is not None and distance <= delta_min:
        return LABEL_MIN, index
    return LABEL_OTHER, None


def run_trial(problem: ProblemTriple, params: SplitParams, cfg: McConfig, saddles: list, minimizers: list,
              trial: int) -> TrialResult:
    z0 = cfg.init.sample(trial_generator(cfg.seed, trial), problem.dimension)
    try:
        trajectory = run(problem, params, z0, tol=cfg.tol, max_iter=cfg.max_iter, escape_radius=cfg.escape_radius,
                         record_envelope=False, keep_records=False)
    except NumericalError as e:
        log.warning("Trial %d failed: %s", trial, e)
        return TrialResult(trial=trial, z0=tuple(z0.tolist()), label=LABEL_NOT_CONVERGED, index=None, x_final=None,
                           iterations=0, residual=float("nan"), error=str(e))

    x_final = trajectory.final_x
    if trajectory.status == STATUS_ESCAPED:
        label, index = LABEL_ESCAPED, None
    elif not trajectory.converged:
        label, index = LABEL_NOT_CONVERGED, None
    else:
        label, index = label_point(x_final, saddles, minimizers, cfg.delta_saddle, cfg.delta_min)
    return TrialResult(trial=trial, z0=tuple(z0.tolist()), label=label, index=index,
                       x_final=tuple(x_final.tolist()), iterations=trajectory.iterations,
                       residual=trajectory.final_residual)


def _run_chunk(job) -> list:
    """
    Worker entry point. Rebuilds the problem from its registry name so only plain data crosses processes.
    """
    cfg, saddles, minimizers, trials = job
    problem = registry_make(cfg.problem_name, cfg.problem_params)
    params = ensure_validated(problem, cfg.split)
    return [run_trial(problem, params, cfg, saddles, minimizers, trial) for trial in trials]


def _chunks(count: int, parts: int) -> list:
    return [list(range(count))[i::parts] for i in range(parts)]


def mc_run(cfg: McConfig, workers: int = 1) -> McOutcome:
    """
    Run a Monte-Carlo avoidance experiment.
    :param cfg: Experiment configuration.
    :param workers: Number of processes. Has no effect on the results.
    :return: McOutcome with results ordered by trial index.
    """
    problem = registry_make(cfg.problem_name, cfg.problem_params)
    saddles, minimizers = resolve_attractors(cfg, problem)
    check_mc_config(cfg, problem, saddles, minimizers)
    log.info("Monte-Carlo on %s: %d trials, seed %d, %d saddle(s), %d minimizer(s), %d worker(s)",
             problem.name, cfg.trials, cfg.seed, len(saddles), len(minimizers), workers)

    nproc = max(1, min(workers, cfg.trials))
    jobs = [(cfg, saddles, minimizers, trials) for trials in _chunks(cfg.trials, nproc)]
    if nproc > 1:
        with mp.Pool(processes=nproc) as pool:
            chunks = pool.map(_run_chunk, jobs)
    else:
        chunks = [_run_chunk(job) for job in jobs]

    results = sorted(itertools.chain.from_iterable(chunks), key=lambda r: r.trial)
    outcome = McOutcome(seed=cfg.seed, results=results, saddles=saddles, minimizers=minimizers)
    summary = outcome.summary()
    log.info("Monte-Carlo summary: %s", summary)
    if summary["not_converged"]:
        log.warning("%d trial(s) did not converge", summary["not_converged"])
    return outcome


@dataclass
class Discovery:
    """
    Classified critical points of a multistart search, and the points that could not be classified
    as (z, error) pairs.
    """
    reports: list
    failures: list = field(default_factory=list)

    @property
    def complete(self) -> bool:
        return not self.failures


def _polish(residual, jacobian, z: np.ndarray, tolerance: float) -> np.ndarray:
    for _ in range(DISCOVERY_POLISH_STEPS):
        w = residual(z)
        if np.linalg.norm(w) <= tolerance * (1.0 + np.linalg.norm(z)):
            break
        try:
            z = z - solve_linear(jacobian(z), w)
        except SingularMatrix:
            break
    return z


def search_critical_points(problem: ProblemTriple, params: SplitParams, lo: float = -2.0, hi: float = 2.0,
                           points: int = 5, cluster_radius: float = CLUSTER_RADIUS) -> Discovery:
    """
    Multistart search for zeros of w(z) = p(z) - prox_{gamma g}(z) from a grid of starts, deduplicated and
    classified. The residual and its Jacobian both take q at prox_{gamma g}(z), whatever params.q_at_z says;
    the two agree at fixed points.
    :param problem: ProblemTriple of low dimension.
    :param params: Splitting parameters.
    :param lo: Lower corner of the start grid.
    :param hi: Upper corner of the start grid.
    :param points: Starts per axis.
    :param cluster_radius: Deduplication radius in z-space.
    :return: Discovery. An InvariantViolation raised while classifying propagates.
    """
    params = replace(ensure_validated(problem, params), q_at_z=False)
    dim = problem.dimension
    eye = np.eye(dim)
    axis = np.linspace(lo, hi, points)

    def residual(z):
        return dys_step(problem, params, z).w

    def jacobian(z):
        return (jacobian_T(problem, params, z) - eye) / params.alpha

    # |grad env| = |A^T w| / gamma
    tolerance = DISCOVERY_RESIDUAL_TOL * min(1.0, params.gamma)
    found = []
    for start in itertools.product(axis, repeat=dim):
        try:
            solution = scipy.optimize.root(residual, np.array(start), jac=jacobian, method="hybr")
            if not solution.success:
                continue
            z = _polish(residual, jacobian, solution.x, tolerance)
            converged = np.linalg.norm(residual(z)) <= tolerance * (1.0 + np.linalg.norm(z))
        except InvariantViolation:
            raise
        except DyeError as e:
            log.debug("Root search from %s abandoned: %s", start, e)
            continue
        if converged:
            found.append(z)

    discovery = Discovery(reports=[])
    for z in cluster_points(found, cluster_radius):
        try:
            discovery.reports.append(classify(problem, params, z))
        except InvariantViolation:
            raise
        except DyeError as e:
            log.warning("Could not classify critical point %s: %s", z.tolist(), e)
            discovery.failures.append((z, "%s: %s" % (type(e).__name__, e)))
    discovery.reports.sort(key=lambda r: tuple(r.z))
    log.info("Found %d critical point(s) of %s, %d unclassified", len(discovery.reports), problem.name,
             len(discovery.failures))
    return discovery


def discover_saddles(problem: ProblemTriple, params: SplitParams, lo: float = -2.0, hi: float = 2.0,
                     points: int = 5, cluster_radius: float = CLUSTER_RADIUS) -> list:
    """
    Classified critical points found by search_critical_points, sorted by z.
    :return: List of PointReport, possibly empty. Unclassified points are logged and left out.
    """
    return search_critical_points(problem, params, lo=lo, hi=hi, points=points, cluster_radius=cluster_radius).reports


def attractors_from_reports(reports: list):
    """
    Split classified critical points into (saddles, minimizers) in x-space.
    """
    saddles = [r.x for r in reports if r.classification == ENV_STRICT_SADDLE]
    minimizers = [r.x for r in reports if r.classification == ENV_LOCAL_MIN]
    return saddles, minimizers


def discovered_attractors(problem: ProblemTriple, params: SplitParams, lo: float = -2.0, hi: float = 2.0,
                          points: int = 5):
    """
    (saddles, minimizers) for a Monte-Carlo experiment, taken from a critical-point search.
    :raises BadConfig: if a found critical point could not be classified.
    """
    discovery = search_critical_points(problem, params, lo=lo, hi=hi, points=points)
    if not discovery.complete:
        z, error = discovery.failures[0]
        raise BadConfig("%d critical point(s) of %s could not be classified, e.g. z=%s (%s)"
                        % (len(discovery.failures), problem.name, z.tolist(), error))
    return attractors_from_reports(discovery.reports)
