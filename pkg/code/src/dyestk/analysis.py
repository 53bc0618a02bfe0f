"""
Critical point classification, step-size bounds and correspondence checks between the envelope and the objective.
"""
import logging
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg

from dyestk.constants import PHI_STATIONARY_RTOL, EIG_TOL, UNSTABLE_EIG_TOL, CORRESPONDENCE_TOL, \
    LOCAL_MIN_PROBE_RADIUS, LOCAL_MIN_PROBE_DIRECTIONS, SANDWICH_SLACK, DEFAULT_ALPHA_FRACTION, JACOBIAN_FD_RTOL
from dyestk.envelope import evaluate, env_hessian_at_critical, metric_at, prox_g_jacobian, critical_tolerance
from dyestk.exceptions import ModeMismatch, NotFixedPoint, CorrespondenceViolated, HessianUnavailable, \
    LocalSmoothnessViolated, BadConfig
from dyestk.functions import ProblemTriple, ExtendedReal, POS_INF, extended, phi_value, phi_gradient, phi_hessian
from dyestk.linalg import as_vec, solve_linear, lambda_min, fd_jacobian, symmetrize
from dyestk.splitting import SplitParams, ensure_validated, dys_step, envelope_value_of_state, prox_g

log = logging.getLogger(__name__)

ENV_STRICT_SADDLE = "EnvStrictSaddle"
ENV_LOCAL_MIN = "EnvLocalMinCandidate"
ENV_CRITICAL = "EnvCritical"
ENV_INDETERMINATE = "Indeterminate"
ENV_NOT_CRITICAL = "NotCritical"

PHI_STRICT_SADDLE = "StrictSaddle"
PHI_LOCAL_MIN = "LocalMinCandidate"
PHI_INDETERMINATE = "Indeterminate"
PHI_NOT_STATIONARY = "NotStationary"

FIXED_POINT_RTOL = 1e-8


def _sign_label(lam: float, negative: str, positive: str, flat: str) -> str:
    if lam < -EIG_TOL:
        return negative
    if lam > EIG_TOL:
        return positive
    return flat


def _symmetric_split(problem: ProblemTriple) -> bool:
    return problem.g.is_zero or problem.h.is_zero


@dataclass
class PointReport:
    z: np.ndarray
    x: np.ndarray
    grad_env_norm: float
    classification: str
    lambda_min_env: float = None
    phi_grad_norm: float = None
    lambda_min_phi: float = None
    phi_classification: str = None

    @property
    def critical(self) -> bool:
        return self.classification != ENV_NOT_CRITICAL

    def as_dict(self) -> dict:
        return {"z": self.z.tolist(), "x": self.x.tolist(), "grad_env_norm": self.grad_env_norm,
                "classification": self.classification, "lambda_min_env": self.lambda_min_env,
                "phi_grad_norm": self.phi_grad_norm, "lambda_min_phi": self.lambda_min_phi,
                "phi_classification": self.phi_classification}


def classify(problem: ProblemTriple, params: SplitParams, z) -> PointReport:
    """
    Classify z as a point of the envelope and x = prox_{gamma g}(z) as a point of the objective.
    At envelope critical points, stationarity of x and (for g = 0 or h = 0) the sign of the smallest Hessian
    eigenvalue must agree between the two.
    :param problem: ProblemTriple
    :param params: Splitting parameters.
    :param z: Point in z-space.
    :return: PointReport
    :raises CorrespondenceViolated: if the envelope and objective disagree.
    """
    params = ensure_validated(problem, params)
    z = as_vec(z, "classify point")
    evaluation = evaluate(problem, params, z, with_hessian=False)
    x = prox_g(problem, params.gamma, z)
    grad_env_norm = evaluation.gradient_norm
    try:
        phi_grad_norm = float(np.linalg.norm(phi_gradient(problem, x)))
    except HessianUnavailable:
        phi_grad_norm = None

    if grad_env_norm > critical_tolerance(z):
        return PointReport(z=z, x=x, grad_env_norm=grad_env_norm, classification=ENV_NOT_CRITICAL,
                           phi_grad_norm=phi_grad_norm,
                           phi_classification=None if phi_grad_norm is None else PHI_NOT_STATIONARY)

    hessian = env_hessian_at_critical(problem, params, z)
    if _symmetric_split(problem):
        lambda_min_env = lambda_min(hessian)
        classification = _sign_label(lambda_min_env, ENV_STRICT_SADDLE, ENV_LOCAL_MIN, ENV_INDETERMINATE)
    else:
        # General three-operator case: spectrum reported, not classified.
        lambda_min_env = float(np.min(np.real(scipy.linalg.eigvals(hessian))))
        classification = ENV_CRITICAL

    if phi_grad_norm is None:
        raise HessianUnavailable(problem.f.name + " (gradient)", x.tolist())
    phi_tolerance = PHI_STATIONARY_RTOL * (1.0 + np.linalg.norm(x))
    if phi_grad_norm > phi_tolerance:
        raise CorrespondenceViolated("envelope critical at z=%s but |grad phi(x)| = %.3e > %.3e"
                                     % (z.tolist(), phi_grad_norm, phi_tolerance))
    lambda_min_phi = lambda_min(symmetrize(phi_hessian(problem, x)))
    phi_classification = _sign_label(lambda_min_phi, PHI_STRICT_SADDLE, PHI_LOCAL_MIN, PHI_INDETERMINATE)

    if _symmetric_split(problem) and ENV_INDETERMINATE != classification and \
            PHI_INDETERMINATE != phi_classification:
        if (lambda_min_env < -EIG_TOL) != (lambda_min_phi < -EIG_TOL):
            raise CorrespondenceViolated("curvature signs disagree at z=%s: envelope %.6g, objective %.6g"
                                         % (z.tolist(), lambda_min_env, lambda_min_phi))

    return PointReport(z=z, x=x, grad_env_norm=grad_env_norm, classification=classification,
                       lambda_min_env=lambda_min_env, phi_grad_norm=phi_grad_norm, lambda_min_phi=lambda_min_phi,
                       phi_classification=phi_classification)


# Step size bounds

def alpha1_bound(gamma: float, l_g: float, l_f: float) -> ExtendedReal:
    """
    2 / (1 - ((1 - gamma L_g)/(1 + gamma L_g)) ((1 - gamma L_f)/(1 + gamma L_f))), +inf when vacuous.
    """
    product = ((1.0 - gamma * l_g) / (1.0 + gamma * l_g)) * ((1.0 - gamma * l_f) / (1.0 + gamma * l_f))
    denominator = 1.0 - product
    if denominator <= 0.0:
        return POS_INF
    return extended(2.0 / denominator)


def alpha2_bound(gamma: float, l_f: float, l_h: float, l_norm: float) -> ExtendedReal:
    """
    (1 + gamma L_f) / (gamma (L_h |L|^2 + L_f)), +inf when vacuous.
    """
    denominator = gamma * (l_h * l_norm ** 2 + l_f)
    if denominator <= 0.0:
        return POS_INF
    return extended((1.0 + gamma * l_f) / denominator)


@dataclass
class StepBounds:
    """
    alpha1 applies to DRS (h = 0) and alpha2 to FBS (g = 0); None where the split does not apply.
    lambda_min_JT_probe is the analytic lower bound on lambda_min(J_T) at the chosen alpha.
    """
    mode: str
    gamma: float
    alpha: float
    alpha1: ExtendedReal = None
    alpha2: ExtendedReal = None
    lambda_min_JT_probe: float = None
    alpha_convex: float = None

    @property
    def bound(self) -> ExtendedReal:
        if self.mode == "DRS" and self.alpha1 is not None:
            return self.alpha1
        if self.mode == "FBS" and self.alpha2 is not None:
            return self.alpha2
        candidates = [b for b in (self.alpha1, self.alpha2) if b is not None]
        return min(candidates) if candidates else POS_INF

    @property
    def alpha_admissible(self) -> bool:
        return self.bound.infinite or self.alpha < float(self.bound)

    def as_dict(self) -> dict:
        def encode(value):
            return None if value is None or value.infinite else float(value)

        return {"mode": self.mode, "gamma": self.gamma, "alpha": self.alpha,
                "alpha1": encode(self.alpha1), "alpha1_vacuous": self.alpha1 is not None and self.alpha1.infinite,
                "alpha2": encode(self.alpha2), "alpha2_vacuous": self.alpha2 is not None and self.alpha2.infinite,
                "lambda_min_JT_probe": self.lambda_min_JT_probe, "alpha_convex": self.alpha_convex}


def _declared_l_f(problem: ProblemTriple) -> float:
    if problem.f.is_zero:
        return 0.0
    if problem.L_f is None:
        raise LocalSmoothnessViolated("f has no declared Hessian bound L_f")
    return problem.L_f


def step_bounds(problem: ProblemTriple, params: SplitParams) -> StepBounds:
    """
    Relaxation bounds under which T is a local diffeomorphism around its fixed points.
    :raises ModeMismatch: when neither h = 0 nor g = 0.
    """
    params = ensure_validated(problem, params)
    if not _symmetric_split(problem):
        raise ModeMismatch(params.mode, "DRS (h = 0) or FBS (g = 0)")
    gamma, alpha = params.gamma, params.alpha
    l_f = _declared_l_f(problem)
    bounds = StepBounds(mode=params.mode, gamma=gamma, alpha=alpha)

    drs_probe = fbs_probe = None
    if problem.h.is_zero:
        bounds.alpha1 = alpha1_bound(gamma, problem.L_g, l_f)
        drs_probe = 1.0 - alpha / 2.0 + alpha * (1.0 / (1.0 + gamma * l_f) - 0.5) * (
                2.0 / (1.0 + gamma * problem.L_g) - 1.0)
    if problem.g.is_zero:
        bounds.alpha2 = alpha2_bound(gamma, l_f, problem.L_h, problem.L_norm)
        fbs_probe = 1.0 - alpha + alpha * (1.0 - gamma * problem.L_norm ** 2 * problem.L_h) / (1.0 + gamma * l_f)
    if params.mode == "FBS" or drs_probe is None:
        bounds.lambda_min_JT_probe = fbs_probe
    else:
        bounds.lambda_min_JT_probe = drs_probe

    if problem.L_h > 0:
        bounds.alpha_convex = 2.0 - gamma * problem.L_norm ** 2 / (2.0 * problem.L_h)

    for name, value in (("alpha1", bounds.alpha1), ("alpha2", bounds.alpha2)):
        if value is not None and value.infinite:
            log.warning("%s bound is vacuous at gamma=%g (any alpha > 0 keeps T locally invertible)", name, gamma)
    if not bounds.alpha_admissible:
        log.warning("alpha=%g is not below the %s bound %r", alpha, params.mode, bounds.bound)
    return bounds


def default_alpha(problem: ProblemTriple, gamma: float, mode: str = None) -> float:
    """
    0.9 min(bound, 1) with the DRS/FBS bound of the mode, 0.9 otherwise.
    """
    params = ensure_validated(problem, SplitParams(gamma=gamma, alpha=1.0, mode=mode))
    if not _symmetric_split(problem):
        return DEFAULT_ALPHA_FRACTION
    bound = step_bounds(problem, params).bound
    if bound.infinite:
        return DEFAULT_ALPHA_FRACTION
    return DEFAULT_ALPHA_FRACTION * min(float(bound), 1.0)


# Jacobian of T

def _f_hessian(problem: ProblemTriple, p: np.ndarray) -> np.ndarray:
    n = problem.dimension
    if problem.f.is_zero:
        return np.zeros((n, n))
    hess_f = problem.f.hessian_at(p)
    if hess_f is None:
        raise HessianUnavailable(problem.f.name, p.tolist())
    return hess_f


def jacobian_T(problem: ProblemTriple, params: SplitParams, z) -> np.ndarray:
    """
    J_T(z) = I + alpha (J_p(z) - J_prox(z)) with J_p = (I + gamma hess f(p))^-1 A(z) and
    J_prox = (I + gamma hess g(x))^-1. This is the Jacobian of the step with q evaluated at prox_{gamma g}(z).
    """
    params = ensure_validated(problem, params)
    z = as_vec(z, "jacobian_T point")
    gamma = params.gamma
    state = dys_step(problem, replace(params, q_at_z=False), z)
    eye = np.eye(problem.dimension)
    metric = metric_at(problem, gamma, state.proxg)
    j_p = solve_linear(eye + gamma * _f_hessian(problem, state.p), metric)
    j_x = prox_g_jacobian(problem, gamma, state.proxg)
    return eye + params.alpha * (j_p - j_x)


@dataclass
class JacobianReport:
    analytic: np.ndarray
    numeric: np.ndarray
    tolerance: float = JACOBIAN_FD_RTOL

    @property
    def deviation(self) -> float:
        return float(np.max(np.abs(self.analytic - self.numeric)) / (1.0 + np.max(np.abs(self.analytic))))

    @property
    def passed(self) -> bool:
        return self.deviation <= self.tolerance


def jacobian_check(problem: ProblemTriple, params: SplitParams, z) -> JacobianReport:
    """
    Analytic J_T against central differences of the operator.
    """
    params = replace(ensure_validated(problem, params), q_at_z=False)
    z = as_vec(z, "jacobian_check point")
    numeric = fd_jacobian(lambda v: dys_step(problem, params, v).z_next, z)
    return JacobianReport(analytic=jacobian_T(problem, params, z), numeric=numeric)


def _require_fixed_point(problem: ProblemTriple, params: SplitParams, zstar: np.ndarray) -> None:
    residual = dys_step(problem, replace(params, q_at_z=False), zstar).residual
    tolerance = FIXED_POINT_RTOL * (1.0 + np.linalg.norm(zstar))
    if residual > tolerance:
        raise NotFixedPoint(residual, tolerance)


def diffeo_probe(problem: ProblemTriple, params: SplitParams, zstar) -> float:
    """
    Smallest real part of the spectrum of J_T at a fixed point. Positive when alpha is below the relevant bound.
    """
    params = ensure_validated(problem, params)
    zstar = as_vec(zstar, "diffeo_probe point")
    _require_fixed_point(problem, params, zstar)
    eigenvalues = scipy.linalg.eigvals(jacobian_T(problem, params, zstar))
    return float(np.min(np.real(eigenvalues)))


@dataclass
class StabilityReport:
    """
    Spectrum of J_T at a fixed point. The fixed point is unstable when some |eigenvalue| exceeds 1.
    """
    eigenvalues: np.ndarray
    spectral_radius: float
    unstable: bool
    stable_center_dim: int
    env_classification: str = None
    consistent: bool = True

    def as_dict(self) -> dict:
        return {"eigenvalues_real": np.real(self.eigenvalues).tolist(),
                "eigenvalues_imag": np.imag(self.eigenvalues).tolist(),
                "spectral_radius": self.spectral_radius, "unstable": self.unstable,
                "stable_center_dim": self.stable_center_dim, "env_classification": self.env_classification,
                "consistent": self.consistent}


def fixed_point_stability(problem: ProblemTriple, params: SplitParams, zstar) -> StabilityReport:
    """
    Linear stability of T at a fixed point and, for g = 0 or h = 0, agreement between instability of the
    fixed point and strict-saddle curvature of the envelope.
    """
    params = ensure_validated(problem, params)
    zstar = as_vec(zstar, "fixed_point_stability point")
    _require_fixed_point(problem, params, zstar)
    eigenvalues = scipy.linalg.eigvals(jacobian_T(problem, params, zstar))
    moduli = np.abs(eigenvalues)
    radius = float(np.max(moduli))
    unstable = radius > 1.0 + UNSTABLE_EIG_TOL
    report = StabilityReport(eigenvalues=eigenvalues, spectral_radius=radius, unstable=unstable,
                             stable_center_dim=int(np.sum(moduli <= 1.0 + UNSTABLE_EIG_TOL)))
    if _symmetric_split(problem):
        label = classify(problem, params, zstar).classification
        report.env_classification = label
        if label == ENV_STRICT_SADDLE:
            report.consistent = unstable
        elif label == ENV_LOCAL_MIN:
            report.consistent = not unstable
        if not report.consistent:
            log.warning("Fixed point %s: spectral radius %.6g but envelope says %s", zstar.tolist(), radius, label)
    return report


# Correspondence between envelope and objective

@dataclass
class CorrespondenceReport:
    envelope_value: float
    phi_value: float
    gap: float
    worst_descent: float
    directions: int


def minimizer_correspondence_check(problem: ProblemTriple, params: SplitParams, zstar, seed: int = 0,
                                   radius: float = LOCAL_MIN_PROBE_RADIUS,
                                   directions: int = LOCAL_MIN_PROBE_DIRECTIONS) -> CorrespondenceReport:
    """
    At a converged point: envelope value equals phi(prox_{gamma g}(zstar)) and no probed direction around
    prox_{gamma g}(zstar) decreases phi.
    :raises CorrespondenceViolated: if either check fails.
    """
    params = ensure_validated(problem, params)
    zstar = as_vec(zstar, "correspondence point")
    state = dys_step(problem, replace(params, q_at_z=False), zstar)
    x = state.proxg
    envelope = envelope_value_of_state(problem, params.gamma, state)
    phi_x = phi_value(problem, x)
    if not phi_x.is_finite:
        raise CorrespondenceViolated("phi is +inf at prox_{gamma g}(z*) = %s" % x.tolist())
    phi_x = float(phi_x)
    gap = abs(envelope - phi_x)
    if gap > CORRESPONDENCE_TOL * (1.0 + abs(phi_x)):
        raise CorrespondenceViolated("envelope %.17g differs from phi(x) %.17g by %.3e" % (envelope, phi_x, gap))

    rng = np.random.default_rng(seed)
    worst = 0.0
    slack = 1e-12 * (1.0 + abs(phi_x))
    for _ in range(directions):
        u = rng.standard_normal(x.size)
        u /= np.linalg.norm(u)
        trial = phi_value(problem, x + radius * u)
        if not trial.is_finite:
            continue
        worst = max(worst, phi_x - float(trial))
    if worst > slack:
        raise CorrespondenceViolated("phi decreases by %.3e within radius %g of x* = %s" % (worst, radius, x.tolist()))
    return CorrespondenceReport(envelope_value=envelope, phi_value=phi_x, gap=gap, worst_descent=worst,
                                directions=directions)


@dataclass
class SandwichReport:
    """
    Signed slacks of the three envelope inequalities (non-negative means satisfied).
    """
    lower: float
    upper: float
    prox_upper: float
    slack: float = SANDWICH_SLACK

    @property
    def passed(self) -> bool:
        return min(self.lower, self.upper, self.prox_upper) >= -self.slack


def sandwich_check(problem: ProblemTriple, params: SplitParams, z) -> SandwichReport:
    """
    phi(p) + C1 |w|^2 <= env(z) <= phi(p) + C2 |w|^2 and env(z) <= phi(prox_{gamma g}(z)), with
    C1 = (1 - gamma c) / (2 gamma), C2 = (1 + gamma c) / (2 gamma), c = L_g + L_h |L|^2.
    """
    params = ensure_validated(problem, params)
    gamma = params.gamma
    state = dys_step(problem, replace(params, q_at_z=False), z)
    envelope = envelope_value_of_state(problem, gamma, state)
    smooth = problem.smooth_constant
    c1 = (1.0 - gamma * smooth) / (2.0 * gamma)
    c2 = (1.0 + gamma * smooth) / (2.0 * gamma)
    w2 = state.w @ state.w
    phi_p = float(phi_value(problem, state.p))
    phi_x = phi_value(problem, state.proxg)
    prox_upper = np.inf if not phi_x.is_finite else float(phi_x) - envelope
    return SandwichReport(lower=envelope - (phi_p + c1 * w2), upper=phi_p + c2 * w2 - envelope,
                          prox_upper=prox_upper)


@dataclass
class InfEqualityReport:
    env_min: float
    phi_min: float
    tolerance: float
    env_argmin: list = field(default_factory=list)
    phi_argmin: list = field(default_factory=list)

    @property
    def gap(self) -> float:
        return abs(self.env_min - self.phi_min)

    @property
    def passed(self) -> bool:
        return self.gap <= self.tolerance


def _grid_points(lo: float, hi: float, points: int, dim: int) -> tuple:
    axis = np.linspace(lo, hi, points)
    mesh = np.meshgrid(*([axis] * dim), indexing="ij")
    return [np.array(coords) for coords in zip(*(m.ravel() for m in mesh))], axis[1] - axis[0]


def _grid_min(values: list, grid: list):
    finite = [(v, p) for v, p in zip(values, grid) if v is not None]
    value, point = min(finite, key=lambda item: item[0])
    return value, point


def inf_equality_check(problem: ProblemTriple, params: SplitParams, lo: float = -2.0, hi: float = 2.0,
                       points: int = 201) -> InfEqualityReport:
    """
    Compare the minimum of the envelope over a z-grid with the minimum of phi over the same x-grid.
    The tolerance is the value variation between the grid minimizers and their neighbours.
    """
    params = ensure_validated(problem, params)
    dim = problem.dimension
    if dim > 2:
        raise BadConfig("inf_equality_check grids only 1-D and 2-D problems, got n=%d" % dim)
    if points < 3:
        raise BadConfig("inf_equality_check needs at least 3 points per axis")
    grid, step = _grid_points(lo, hi, points, dim)

    def phi_or_none(x):
        value = phi_value(problem, x)
        return float(value) if value.is_finite else None

    def env(z):
        return envelope_value_of_state(problem, params.gamma, dys_step(problem, replace(params, q_at_z=False), z))

    env_values = [env(z) for z in grid]
    phi_values = [phi_or_none(x) for x in grid]
    env_min, env_point = _grid_min(env_values, grid)
    phi_min, phi_point = _grid_min(phi_values, grid)

    variation = 0.0
    for i in range(dim):
        offset = np.zeros(dim)
        offset[i] = step
        for sign in (1.0, -1.0):
            variation = max(variation, abs(env(env_point + sign * offset) - env_min))
            neighbour = phi_or_none(phi_point + sign * offset)
            if neighbour is not None:
                variation = max(variation, abs(neighbour - phi_min))
    return InfEqualityReport(env_min=env_min, phi_min=phi_min, tolerance=variation + SANDWICH_SLACK,
                             env_argmin=env_point.tolist(), phi_argmin=phi_point.tolist())
