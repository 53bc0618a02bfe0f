"""
The Davis-Yin envelope, its gradient, the variable metric A(z) and the Hessian at critical points.

With x = prox_{gamma g}(z), G = hess g^gamma(z) = (I - (I + gamma hess g(x))^-1) / gamma and
H = L^T hess h(L x) L:

    A(z)           = I - 2 gamma G - gamma H (I - gamma G)
    grad env(z)    = -(1/gamma) A(z)^T w(z)
    hess env(z*)   = -(1/gamma) A^T (I + gamma hess f(p))^-1 A + (1/gamma) A^T (I + gamma hess g(x))^-1

A is the Jacobian of z -> z - 2 gamma grad g^gamma(z) - gamma q(z). It is symmetric when g = 0 or h = 0.
"""
import logging
from dataclasses import dataclass, replace

import numpy as np

from dyestk.constants import SOLVE_MAX_CONDITION, CRITICAL_RTOL, HESSIAN_SYMMETRY_TOL, EQUIVALENCE_RTOL
from dyestk.exceptions import MetricSingular, NotCritical, LocalSmoothnessViolated, HessianUnavailable, NotSymmetric
from dyestk.functions import ProblemTriple
from dyestk.linalg import as_vec, inverse, solve_linear, condition_estimate, operator_norm, symmetry_deviation, \
    inf_norm, symmetrize
from dyestk.splitting import SplitParams, DysState, ensure_validated, dys_step, envelope_value_of_state, prox_g

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class EnvelopeEval:
    """
    Envelope value, gradient and metric at z. hessian is only set at critical points.
    """
    z: np.ndarray
    value: float
    gradient: np.ndarray
    metric: np.ndarray
    hessian: np.ndarray = None

    @property
    def gradient_norm(self) -> float:
        return float(np.linalg.norm(self.gradient))


def _envelope_state(problem: ProblemTriple, params: SplitParams, z) -> DysState:
    """
    A step with q evaluated at prox_{gamma g}(z), whatever the q_at_z flag says.
    """
    params = ensure_validated(problem, params)
    return dys_step(problem, replace(params, q_at_z=False), z)


def prox_g_jacobian(problem: ProblemTriple, gamma: float, x: np.ndarray) -> np.ndarray:
    """
    Jacobian of prox_{gamma g} at the z with prox_{gamma g}(z) = x, i.e. (I + gamma hess g(x))^-1.
    """
    n = problem.dimension
    if problem.g.is_zero:
        return np.eye(n)
    return inverse(np.eye(n) + gamma * problem.g.hessian(x))


def composite_hessian(problem: ProblemTriple, x: np.ndarray) -> np.ndarray:
    """
    L^T hess h(L x) L.
    """
    n = problem.dimension
    if problem.h.is_zero:
        return np.zeros((n, n))
    lm = problem.L.matrix
    return lm.T @ problem.h.hessian(lm @ x) @ lm


def metric_at(problem: ProblemTriple, gamma: float, x: np.ndarray) -> np.ndarray:
    """
    A(z) from x = prox_{gamma g}(z).
    :raises MetricSingular: if A is numerically singular.
    """
    n = problem.dimension
    eye = np.eye(n)
    g_env_hess = (eye - prox_g_jacobian(problem, gamma, x)) / gamma
    metric = eye - 2.0 * gamma * g_env_hess - gamma * composite_hessian(problem, x) @ (eye - gamma * g_env_hess)
    condition = condition_estimate(metric)
    if not np.isfinite(condition) or condition > SOLVE_MAX_CONDITION:
        raise MetricSingular(condition)
    return metric


def env_value(problem: ProblemTriple, params: SplitParams, z) -> float:
    """
    Envelope value at z.
    """
    params = ensure_validated(problem, params)
    return envelope_value_of_state(problem, params.gamma, _envelope_state(problem, params, z))


def env_metric(problem: ProblemTriple, params: SplitParams, z) -> np.ndarray:
    params = ensure_validated(problem, params)
    z = as_vec(z, "env_metric point")
    return metric_at(problem, params.gamma, prox_g(problem, params.gamma, z))


def env_gradient(problem: ProblemTriple, params: SplitParams, z) -> np.ndarray:
    """
    -(1/gamma) A(z)^T (p(z) - prox_{gamma g}(z)).
    """
    params = ensure_validated(problem, params)
    state = _envelope_state(problem, params, z)
    metric = metric_at(problem, params.gamma, state.proxg)
    return -(metric.T @ state.w) / params.gamma


def critical_tolerance(z: np.ndarray) -> float:
    return CRITICAL_RTOL * (1.0 + np.linalg.norm(z))


def _f_hessian_at(problem: ProblemTriple, params: SplitParams, point: np.ndarray) -> np.ndarray:
    n = problem.dimension
    if problem.f.is_zero:
        return np.zeros((n, n))
    if not params.local_smoothness:
        raise LocalSmoothnessViolated("gamma=%r with L_f=%r (need L_f declared and gamma L_f < 1)"
                                      % (params.gamma, problem.L_f))
    hess_f = problem.f.hessian_at(point)
    if hess_f is None:
        raise HessianUnavailable(problem.f.name, point.tolist())
    l_f = problem.L_f
    norm = operator_norm(hess_f)
    if norm > l_f * (1.0 + 1e-6) + 1e-8:
        raise LocalSmoothnessViolated("|hess f| = %.6g exceeds L_f = %.6g at %s" % (norm, l_f, point.tolist()))
    return hess_f


def env_hessian_at_critical(problem: ProblemTriple, params: SplitParams, zstar) -> np.ndarray:
    """
    Envelope Hessian at a critical point.
    :param problem: ProblemTriple
    :param params: Splitting parameters.
    :param zstar: Critical point of the envelope.
    :return: Hessian matrix. Symmetrized (after a symmetry check) when g = 0 or h = 0.
    :raises NotCritical: if |grad env(zstar)| > 1e-8 (1 + |zstar|).
    """
    params = ensure_validated(problem, params)
    zstar = as_vec(zstar, "env_hessian point")
    gamma = params.gamma
    state = _envelope_state(problem, params, zstar)
    metric = metric_at(problem, gamma, state.proxg)
    gradient = -(metric.T @ state.w) / gamma
    tolerance = critical_tolerance(zstar)
    grad_norm = float(np.linalg.norm(gradient))
    if grad_norm > tolerance:
        raise NotCritical(grad_norm, tolerance)

    n = problem.dimension
    eye = np.eye(n)
    hess_f = _f_hessian_at(problem, params, state.p)
    term_f = metric.T @ solve_linear(eye + gamma * hess_f, metric)
    term_g = metric.T @ prox_g_jacobian(problem, gamma, state.proxg)
    hessian = (term_g - term_f) / gamma

    deviation = symmetry_deviation(hessian)
    if problem.g.is_zero or problem.h.is_zero:
        allowed = HESSIAN_SYMMETRY_TOL * (1.0 + inf_norm(hessian))
        if deviation > allowed:
            raise NotSymmetric(deviation, allowed)
        return symmetrize(hessian)
    log.debug("General DYS envelope Hessian at %s: asymmetry %.3e", zstar.tolist(), deviation)
    return hessian


def evaluate(problem: ProblemTriple, params: SplitParams, z, with_hessian: bool = True) -> EnvelopeEval:
    """
    Value, gradient and metric at z, plus the Hessian when z is critical.
    """
    params = ensure_validated(problem, params)
    z = as_vec(z, "envelope point")
    state = _envelope_state(problem, params, z)
    metric = metric_at(problem, params.gamma, state.proxg)
    gradient = -(metric.T @ state.w) / params.gamma
    hessian = None
    if with_hessian and np.linalg.norm(gradient) <= critical_tolerance(z):
        hessian = env_hessian_at_critical(problem, params, z)
    return EnvelopeEval(z=z, value=envelope_value_of_state(problem, params.gamma, state), gradient=gradient,
                        metric=metric, hessian=hessian)


def equivalence_check(problem: ProblemTriple, params: SplitParams, z) -> float:
    """
    Distance between T(z) and the variable-metric gradient step z - alpha gamma A^-T grad env(z).
    """
    params = ensure_validated(problem, params)
    z = as_vec(z, "equivalence_check point")
    gamma, alpha = params.gamma, params.alpha
    operator_image = dys_step(problem, replace(params, q_at_z=False), z).z_next
    metric = env_metric(problem, params, z)
    gradient = env_gradient(problem, params, z)
    gradient_image = z - alpha * gamma * solve_linear(metric.T, gradient)
    deviation = float(np.linalg.norm(operator_image - gradient_image))
    if deviation > EQUIVALENCE_RTOL * (1.0 + np.linalg.norm(z)):
        log.warning("Gradient-step equivalence off by %.3e at %s", deviation, z.tolist())
    return deviation
