"""
Proximal mappings and Moreau envelopes of weakly convex functions.

For beta-weakly convex xi and 0 < gamma < 1/beta the prox is single valued and

    prox_{gamma xi}(z) = prox_{gamma' xi~}(z / (1 - gamma beta)),   gamma' = gamma / (1 - gamma beta),

with xi~ = xi + beta/2 |.|^2 convex. Without a closed form the strongly convex right hand side is
solved by damped Newton.
"""
import logging
from dataclasses import dataclass

import numpy as np

from dyestk.constants import NEWTON_MAX_ITER, NEWTON_GRAD_TOL, NEWTON_NEAR_TOL_FACTOR, ARMIJO_C, ARMIJO_SHRINK, \
    ARMIJO_MAX_HALVINGS
from dyestk.exceptions import GammaOutOfRange, SubproblemNotConverged, HessianUnavailable, NonFiniteValue, \
    SingularMatrix
from dyestk.functions import ProxableFn, SmoothFn
from dyestk.linalg import as_vec, solve_linear, fd_jacobian, symmetrize

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ProxResult:
    """
    prox_{gamma xi}(z) together with the envelope value and gradient at z.
    """
    point: np.ndarray
    envelope_value: float
    envelope_gradient: np.ndarray


def _as_proxable(xi) -> ProxableFn:
    if isinstance(xi, SmoothFn):
        return xi.as_proxable()
    assert isinstance(xi, ProxableFn)
    return xi


def check_gamma(xi: ProxableFn, gamma: float) -> None:
    """
    Require 0 < gamma < 1/beta.
    """
    if not gamma > 0:
        raise GammaOutOfRange("gamma > 0", gamma, 0.0)
    beta = xi.weak_convexity
    if beta > 0 and gamma * beta >= 1.0:
        raise GammaOutOfRange("prox single-valuedness of %s (1/beta)" % xi.name, gamma, 1.0 / beta)


def _subproblem_value(xi, beta, gamma_c, z_c, u):
    value = xi.value(u)
    if not value.is_finite:
        return None
    return float(value) + 0.5 * beta * (u @ u) + (u - z_c) @ (u - z_c) / (2.0 * gamma_c)


def _newton_prox(xi: ProxableFn, gamma: float, z: np.ndarray, start: np.ndarray) -> np.ndarray:
    beta = xi.weak_convexity
    shrink = 1.0 - gamma * beta
    gamma_c = gamma / shrink
    z_c = z / shrink
    n = z.size
    tolerance = NEWTON_GRAD_TOL * (1.0 + np.linalg.norm(z_c) / gamma_c)

    def gradient(u):
        grad_xi = xi.gradient(u)
        if grad_xi is None:
            raise HessianUnavailable(xi.name + " (gradient)", u.tolist())
        return grad_xi + beta * u + (u - z_c) / gamma_c

    u = np.array(start, dtype=float)
    grad_norm = np.inf
    for iter_count in range(NEWTON_MAX_ITER):
        grad = gradient(u)
        grad_norm = np.linalg.norm(grad)
        if grad_norm <= tolerance:
            return u
        hess_xi = xi.hessian_at(u)
        if hess_xi is None:
            hess_xi = symmetrize(fd_jacobian(xi.gradient, u))
        hess = hess_xi + (beta + 1.0 / gamma_c) * np.eye(n)
        try:
            direction = -solve_linear(hess, grad)
        except SingularMatrix:
            direction = -gamma_c * grad
        slope = grad @ direction
        if slope >= 0:
            # Not a descent direction; the model Hessian is indefinite here.
            direction = -gamma_c * grad
            slope = grad @ direction

        # A full Newton step is taken whenever it reduces |grad|.
        full = u + direction
        if _subproblem_value(xi, beta, gamma_c, z_c, full) is not None and xi.gradient(full) is not None and \
                np.linalg.norm(gradient(full)) < grad_norm:
            u = full
            log.debug("Newton prox iteration %d: |grad|=%.3e full step", iter_count, grad_norm)
            continue
        if grad_norm <= NEWTON_NEAR_TOL_FACTOR * tolerance:
            return u

        current = _subproblem_value(xi, beta, gamma_c, z_c, u)
        step = 1.0
        for _ in range(ARMIJO_MAX_HALVINGS):
            trial = _subproblem_value(xi, beta, gamma_c, z_c, u + step * direction)
            if trial is not None and trial <= current + ARMIJO_C * step * slope:
                break
            step *= ARMIJO_SHRINK
        else:
            raise SubproblemNotConverged(iter_count, grad_norm)
        u = u + step * direction
        log.debug("Newton prox iteration %d: |grad|=%.3e step=%.3e", iter_count, grad_norm, step)

    raise SubproblemNotConverged(NEWTON_MAX_ITER, grad_norm)


def prox_point(xi, gamma: float, z, start=None) -> np.ndarray:
    """
    prox_{gamma xi}(z) only.
    :param xi: ProxableFn (or SmoothFn, viewed as L-weakly convex).
    :param gamma: Step, 0 < gamma < 1/beta.
    :param z: Point.
    :param start: Newton starting point (defaults to z). Ignored with a closed form.
    """
    xi = _as_proxable(xi)
    check_gamma(xi, gamma)
    z = as_vec(z, "prox point")
    if xi.closed_form_prox is not None:
        point = np.asarray(xi.closed_form_prox(gamma, z), dtype=float)
    else:
        point = _newton_prox(xi, gamma, z, z if start is None else as_vec(start, "prox start"))
    if not np.all(np.isfinite(point)):
        raise NonFiniteValue("prox of %s" % xi.name)
    return point


def prox(xi, gamma: float, z, start=None) -> ProxResult:
    """
    Proximal point, Moreau envelope value and envelope gradient (z - prox)/gamma.
    """
    xi = _as_proxable(xi)
    z = as_vec(z, "prox point")
    point = prox_point(xi, gamma, z, start=start)
    value = xi.value(point)
    if not value.is_finite:
        raise NonFiniteValue("envelope of %s (prox left the domain)" % xi.name)
    gap = z - point
    return ProxResult(point=point, envelope_value=float(value) + gap @ gap / (2.0 * gamma),
                      envelope_gradient=gap / gamma)


def envelope_value(xi, gamma: float, z) -> float:
    return prox(xi, gamma, z).envelope_value


def prox_lipschitz_probe(xi, gamma: float, samples: int = 200, radius: float = 1.0, seed: int = 0,
                         dim: int = 1) -> float:
    """
    Largest observed |prox(z1) - prox(z2)| / |z1 - z2| over random pairs in [-radius, radius]^dim.
    Never exceeds 1/(1 - gamma beta) for beta-weakly convex xi.
    """
    xi = _as_proxable(xi)
    check_gamma(xi, gamma)
    rng = np.random.default_rng(seed)
    best = 0.0
    for _ in range(samples):
        z1 = rng.uniform(-radius, radius, dim)
        z2 = rng.uniform(-radius, radius, dim)
        gap = np.linalg.norm(z1 - z2)
        if gap == 0.0:
            continue
        ratio = np.linalg.norm(prox_point(xi, gamma, z1) - prox_point(xi, gamma, z2)) / gap
        best = max(best, ratio)
    log.debug("Prox Lipschitz probe for %s at gamma=%g: %.6f", xi.name, gamma, best)
    return float(best)


def lipschitz_bound(xi, gamma: float) -> float:
    """
    1 / (1 - gamma beta).
    """
    xi = _as_proxable(xi)
    return 1.0 / (1.0 - gamma * xi.weak_convexity)
