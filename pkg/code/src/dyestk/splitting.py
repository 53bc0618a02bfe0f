"""
The Davis-Yin operator T, its DRS/FBS/BFS/GD reductions, parameter validation and the iteration driver.

One step from z:
    x  = prox_{gamma g}(z)
    q  = L^T grad h(L x)          (at L z with q_at_z, the literal operator display)
    r  = 2 x - z
    p  = prox_{gamma f}(r - gamma q)
    w  = p - x
    z+ = z + alpha w
"""
import logging
import time
from dataclasses import dataclass, replace, field

import numpy as np

from dyestk.constants import DEFAULT_TOL, DEFAULT_MAX_ITER, DEFAULT_ESCAPE_RADIUS, REDUCTION_TOL
from dyestk.exceptions import GammaOutOfRange, AlphaNonPositive, ModeMismatch, NonFiniteValue
from dyestk.functions import ProblemTriple
from dyestk.linalg import as_vec
from dyestk.moreau import prox_point

log = logging.getLogger(__name__)

MODES = ("DYS", "DRS", "FBS", "BFS", "GD")

STATUS_CONVERGED = "converged"
STATUS_NOT_CONVERGED = "not_converged"
STATUS_ESCAPED = "escaped"


@dataclass(frozen=True)
class SplitParams:
    """
    Step size gamma, relaxation alpha and splitting mode. validate_params resolves the mode and sets
    local_smoothness (L_f declared and gamma L_f < 1).
    """
    gamma: float
    alpha: float
    mode: str = None
    q_at_z: bool = False
    validated: bool = False
    local_smoothness: bool = False

    def describe(self) -> dict:
        return {"gamma": self.gamma, "alpha": self.alpha, "mode": self.mode, "q_at_z": self.q_at_z,
                "local_smoothness": self.local_smoothness}


@dataclass(frozen=True)
class DysState:
    """
    Intermediates of one DYS step. r = 2 proxg - z and w = p - proxg.
    """
    z: np.ndarray
    q: np.ndarray
    r: np.ndarray
    proxg: np.ndarray
    p: np.ndarray
    w: np.ndarray
    z_next: np.ndarray

    @property
    def residual(self) -> float:
        return float(np.linalg.norm(self.w))


@dataclass(frozen=True)
class TrajectoryRecord:
    iteration: int
    z: np.ndarray
    residual: float
    envelope: float
    elapsed: float


@dataclass
class Trajectory:
    """
    Iteration log of run(). status is converged, not_converged or escaped.
    """
    records: list = field(default_factory=list)
    status: str = STATUS_NOT_CONVERGED
    final_state: DysState = None

    @property
    def converged(self) -> bool:
        return self.status == STATUS_CONVERGED

    @property
    def iterations(self) -> int:
        return self.records[-1].iteration if self.records else 0

    @property
    def final_z(self) -> np.ndarray:
        return self.records[-1].z

    @property
    def final_x(self) -> np.ndarray:
        return self.final_state.proxg

    @property
    def final_residual(self) -> float:
        return self.records[-1].residual


def infer_mode(problem: ProblemTriple) -> str:
    """
    Mode implied by which parts are zero.
    """
    f0, g0, h0 = problem.f.is_zero, problem.g.is_zero, problem.h.is_zero
    if f0 and g0 and h0:
        return "DYS"
    if f0 and g0:
        return "GD"
    if h0:
        return "DRS"
    if g0:
        return "FBS"
    if f0:
        return "BFS"
    return "DYS"


def mode_requirements(mode: str) -> str:
    return {"DYS": "any problem", "DRS": "h = 0", "FBS": "g = 0", "BFS": "f = 0", "GD": "f = g = 0"}[mode]


def mode_compatible(problem: ProblemTriple, mode: str) -> bool:
    f0, g0, h0 = problem.f.is_zero, problem.g.is_zero, problem.h.is_zero
    return {"DYS": True, "DRS": h0, "FBS": g0, "BFS": f0, "GD": f0 and g0}[mode]


def validate_params(problem: ProblemTriple, params: SplitParams) -> SplitParams:
    """
    Check gamma and alpha against the ranges used by the envelope theory.
    :param problem: ProblemTriple
    :param params: Unvalidated parameters.
    :return: Parameters with mode resolved and local_smoothness set.
    """
    gamma, alpha = params.gamma, params.alpha
    if not gamma > 0:
        raise GammaOutOfRange("positivity", gamma, 0.0)
    if not alpha > 0:
        raise AlphaNonPositive(alpha)
    smooth = problem.smooth_constant
    if smooth > 0 and gamma * smooth >= 1.0:
        raise GammaOutOfRange("1/(L_g + L_h |L|^2)", gamma, 1.0 / smooth)
    beta = problem.beta_f
    if beta > 0 and gamma * beta >= 1.0:
        raise GammaOutOfRange("1/beta_f", gamma, 1.0 / beta)

    mode = params.mode if params.mode is not None else infer_mode(problem)
    if mode not in MODES:
        raise ModeMismatch(mode, "one of " + ", ".join(MODES))
    if not mode_compatible(problem, mode):
        raise ModeMismatch(mode, mode_requirements(mode))

    l_f = problem.L_f
    local_smoothness = l_f is not None and (l_f == 0 or gamma * l_f < 1.0)
    if not local_smoothness:
        log.debug("gamma=%g does not satisfy the local smoothness range of f (L_f=%s)", gamma, l_f)
    return replace(params, mode=mode, validated=True, local_smoothness=local_smoothness)


def ensure_validated(problem: ProblemTriple, params: SplitParams) -> SplitParams:
    return params if params.validated else validate_params(problem, params)


def prox_g(problem: ProblemTriple, gamma: float, z: np.ndarray) -> np.ndarray:
    if problem.g.is_zero:
        return np.array(z, dtype=float)
    return prox_point(problem.g, gamma, z)


def prox_f(problem: ProblemTriple, gamma: float, u: np.ndarray) -> np.ndarray:
    if problem.f.is_zero:
        return np.array(u, dtype=float)
    return prox_point(problem.f, gamma, u)


def q_at(problem: ProblemTriple, x: np.ndarray) -> np.ndarray:
    """
    L^T grad h(L x).
    """
    if problem.h.is_zero:
        return np.zeros(problem.dimension)
    return problem.L.adjoint(problem.h.gradient(problem.L.apply(x)))


def dys_step(problem: ProblemTriple, params: SplitParams, z) -> DysState:
    """
    One application of T.
    """
    params = ensure_validated(problem, params)
    z = as_vec(z, "dys_step point")
    gamma = params.gamma
    x = prox_g(problem, gamma, z)
    q = q_at(problem, z if params.q_at_z else x)
    r = 2.0 * x - z
    p = prox_f(problem, gamma, r - gamma * q)
    w = p - x
    z_next = z + params.alpha * w
    return DysState(z=z, q=q, r=r, proxg=x, p=p, w=w, z_next=z_next)


def envelope_value_of_state(problem: ProblemTriple, gamma: float, state: DysState) -> float:
    """
    Envelope value assembled from the intermediates of a step taken with q at prox_{gamma g}(z):

        g^gamma(z) - gamma |grad g^gamma|^2 - gamma <q, grad g^gamma> + h(L x) - gamma/2 |q|^2 + f^gamma(r - gamma q)
    """
    z, x, q, p = state.z, state.proxg, state.q, state.p
    if problem.g.is_zero:
        g_env = 0.0
        grad_g_env = np.zeros_like(z)
    else:
        grad_g_env = (z - x) / gamma
        g_env = problem.g.value(x) + (z - x) @ (z - x) / (2.0 * gamma)
    u = state.r - gamma * q
    if problem.f.is_zero:
        f_env = 0.0
    else:
        f_value = problem.f.value(p)
        if not f_value.is_finite:
            raise NonFiniteValue("f at p(z)")
        f_env = float(f_value) + (u - p) @ (u - p) / (2.0 * gamma)
    h_value = 0.0 if problem.h.is_zero else problem.h.value(problem.L.apply(x))
    return float(g_env - gamma * (grad_g_env @ grad_g_env) - gamma * (q @ grad_g_env) + h_value
                 - 0.5 * gamma * (q @ q) + f_env)


def stop_threshold(tol: float, z: np.ndarray) -> float:
    return tol * (1.0 + np.linalg.norm(z))


def run(problem: ProblemTriple, params: SplitParams, z0, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER,
        escape_radius: float = DEFAULT_ESCAPE_RADIUS, record_envelope: bool = True,
        keep_records: bool = True) -> Trajectory:
    """
    Iterate z <- T z until |w| <= tol (1 + |z|) or max_iter.
    :param problem: ProblemTriple
    :param params: Splitting parameters.
    :param z0: Starting point.
    :param tol: Relative residual tolerance.
    :param max_iter: Iteration cap.
    :param escape_radius: Stop (status escaped) once |z| exceeds this radius. None disables the check.
    :param record_envelope: Evaluate the envelope value at every iterate.
    :param keep_records: Keep every record. Only the last one is kept otherwise.
    :return: Trajectory. A run that does not converge is flagged, not raised.
    """
    params = ensure_validated(problem, params)
    envelope_params = replace(params, q_at_z=False)
    z = as_vec(z0, "starting point")
    trajectory = Trajectory()
    started = time.perf_counter()
    for k in range(max_iter + 1):
        state = dys_step(problem, params, z)
        envelope = None
        if record_envelope:
            envelope_state = state if not params.q_at_z else dys_step(problem, envelope_params, z)
            envelope = envelope_value_of_state(problem, params.gamma, envelope_state)
        record = TrajectoryRecord(iteration=k, z=z, residual=state.residual, envelope=envelope,
                                  elapsed=time.perf_counter() - started)
        if keep_records:
            trajectory.records.append(record)
        else:
            trajectory.records[:] = [record]
        trajectory.final_state = state

        if state.residual <= stop_threshold(tol, z):
            trajectory.status = STATUS_CONVERGED
            break
        if k == max_iter:
            trajectory.status = STATUS_NOT_CONVERGED
            break
        z_next = state.z_next
        if not np.all(np.isfinite(z_next)) or (escape_radius is not None and np.linalg.norm(z_next) > escape_radius):
            trajectory.status = STATUS_ESCAPED
            break
        z = z_next

    log.debug("run on %s finished: %s after %d iterations (residual %.3e)", problem.name, trajectory.status,
              trajectory.iterations, trajectory.final_residual)
    return trajectory


@dataclass
class ReductionReport:
    """
    Deviation of the general operator from each applicable specialized formula.
    """
    deviations: dict
    tolerance: float = REDUCTION_TOL

    @property
    def max_deviation(self) -> float:
        return max(self.deviations.values()) if self.deviations else 0.0

    @property
    def passed(self) -> bool:
        return self.max_deviation <= self.tolerance

    @property
    def applicable(self) -> list:
        return sorted(self.deviations)


def reduction_check(problem: ProblemTriple, params: SplitParams, z) -> ReductionReport:
    """
    Compare dys_step against the DRS / FBS / BFS / GD formulas coded independently.
    """
    params = ensure_validated(problem, params)
    z = as_vec(z, "reduction_check point")
    gamma, alpha = params.gamma, params.alpha
    reference = dys_step(problem, params, z).z_next
    lm = problem.L.matrix

    def grad_h_term(point):
        if problem.h.is_zero:
            return np.zeros_like(z)
        return lm.T @ problem.h.gradient(lm @ point)

    specialized = {}
    if problem.h.is_zero:
        xg = prox_g(problem, gamma, z)
        specialized["DRS"] = z + alpha * (prox_f(problem, gamma, 2.0 * xg - z) - xg)
    if problem.g.is_zero:
        specialized["FBS"] = z + alpha * (prox_f(problem, gamma, z - gamma * grad_h_term(z)) - z)
    if problem.f.is_zero:
        xg = prox_g(problem, gamma, z)
        q = grad_h_term(z if params.q_at_z else xg)
        specialized["BFS"] = z + alpha * (xg - gamma * q - z)
    if problem.f.is_zero and problem.g.is_zero:
        specialized["GD"] = z - alpha * gamma * grad_h_term(z)

    deviations = {name: float(np.max(np.abs(reference - value))) for name, value in specialized.items()}
    report = ReductionReport(deviations=deviations)
    if not deviations:
        log.info("No reduction applies to %s: f, g and h are all nonzero", problem.name)
    return report
