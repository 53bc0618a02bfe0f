"""
Invariant suite behind the `check` command. Each check reports pass, fail or skip with the measured value
and its threshold.
"""
import logging
from dataclasses import dataclass

import numpy as np

from dyestk import analysis, envelope, moreau
from dyestk.constants import EQUIVALENCE_RTOL, SANDWICH_SLACK, REDUCTION_TOL, JACOBIAN_FD_RTOL, CRITICAL_RTOL
from dyestk.exceptions import DyeError, HessianUnavailable, ModeMismatch, LocalSmoothnessViolated
from dyestk.functions import ProblemTriple
from dyestk.linalg import fd_gradient, fd_jacobian
from dyestk.saddle_lab import search_critical_points
from dyestk.splitting import SplitParams, ensure_validated, run, reduction_check, prox_g

log = logging.getLogger(__name__)

PASS = "pass"
FAIL = "fail"
SKIP = "skip"

GRADIENT_FD_RTOL = 1e-5
MOREAU_PROBE_SLACK = 1e-6
ANALYTIC_MINIMIZER_TOL = 1e-6
CHECK_RUN_TOL = 1e-11
JACOBIAN_SAMPLES = 10


@dataclass
class CheckResult:
    name: str
    status: str
    value: object = None
    threshold: object = None
    detail: str = ""

    @property
    def passed(self) -> bool:
        return self.status != FAIL

    def as_dict(self) -> dict:
        return {"name": self.name, "passed": self.passed, "status": self.status, "value": self.value,
                "threshold": self.threshold, "detail": self.detail}


def _measure(name: str, value: float, threshold: float, detail: str = "") -> CheckResult:
    return CheckResult(name=name, status=PASS if value <= threshold else FAIL, value=value, threshold=threshold,
                       detail=detail)


def _samples(rng: np.random.Generator, count: int, dim: int, lo: float, hi: float) -> list:
    return [rng.uniform(lo, hi, dim) for _ in range(count)]


def check_equivalence(problem: ProblemTriple, params: SplitParams, points: list) -> CheckResult:
    worst = max(envelope.equivalence_check(problem, params, z) / (1.0 + np.linalg.norm(z)) for z in points)
    return _measure("equivalence", worst, EQUIVALENCE_RTOL, "|T z - (z - alpha gamma A^-T grad env)| / (1 + |z|)")


def check_sandwich(problem: ProblemTriple, params: SplitParams, points: list) -> CheckResult:
    worst = 0.0
    for z in points:
        report = analysis.sandwich_check(problem, params, z)
        worst = max(worst, -min(report.lower, report.upper, report.prox_upper))
    return _measure("sandwich", worst, SANDWICH_SLACK, "largest violation of the three envelope inequalities")


def check_gradient_fd(problem: ProblemTriple, params: SplitParams, points: list) -> CheckResult:
    worst = 0.0
    for z in points:
        analytic = envelope.env_gradient(problem, params, z)
        numeric = fd_gradient(lambda v: envelope.env_value(problem, params, v), z)
        worst = max(worst, np.linalg.norm(analytic - numeric) / (1.0 + np.linalg.norm(analytic)))
    return _measure("gradient_fd", float(worst), GRADIENT_FD_RTOL, "env_gradient against central differences")


def check_metric_fd(problem: ProblemTriple, params: SplitParams, points: list) -> CheckResult:
    gamma = params.gamma
    eye = np.eye(problem.dimension)
    worst = 0.0
    for z in points:
        g_env_hess = fd_jacobian(lambda v: (v - prox_g(problem, gamma, v)) / gamma, z)
        x = prox_g(problem, gamma, z)
        expected = eye - 2.0 * gamma * g_env_hess - gamma * envelope.composite_hessian(problem, x) @ (
                eye - gamma * g_env_hess)
        analytic = envelope.env_metric(problem, params, z)
        worst = max(worst, np.max(np.abs(analytic - expected)) / (1.0 + np.max(np.abs(analytic))))
    return _measure("metric_fd", float(worst), GRADIENT_FD_RTOL, "A(z) against finite differences of grad g^gamma")


def check_moreau(problem: ProblemTriple, params: SplitParams, points: list, seed: int) -> list:
    results = []
    gamma = params.gamma
    for label, fn in (("f", problem.f), ("g", problem.g)):
        if fn.is_zero:
            continue
        worst = 0.0
        for z in points:
            result = moreau.prox(fn, gamma, z)
            numeric = fd_gradient(lambda v: moreau.envelope_value(fn, gamma, v), z)
            worst = max(worst, np.linalg.norm(result.envelope_gradient - numeric) /
                        (1.0 + np.linalg.norm(result.envelope_gradient)))
        results.append(_measure("moreau_gradient_%s" % label, float(worst), GRADIENT_FD_RTOL))
        observed = moreau.prox_lipschitz_probe(fn, gamma, samples=len(points), seed=seed, dim=problem.dimension)
        bound = moreau.lipschitz_bound(fn, gamma)
        results.append(_measure("moreau_lipschitz_%s" % label, observed, bound + MOREAU_PROBE_SLACK,
                                "observed prox Lipschitz ratio against 1/(1 - gamma beta)"))
    return results


def check_reductions(problem: ProblemTriple, params: SplitParams, points: list) -> CheckResult:
    reports = [reduction_check(problem, params, z) for z in points]
    if not reports[0].applicable:
        return CheckResult(name="reductions", status=SKIP, detail="f, g and h are all nonzero")
    worst = max(r.max_deviation for r in reports)
    return _measure("reductions", worst, REDUCTION_TOL, "applicable: %s" % ", ".join(reports[0].applicable))


def check_jacobian(problem: ProblemTriple, params: SplitParams, points: list) -> CheckResult:
    worst = 0.0
    for z in points[:JACOBIAN_SAMPLES]:
        worst = max(worst, analysis.jacobian_check(problem, params, z).deviation)
    return _measure("jacobian_fd", worst, JACOBIAN_FD_RTOL, "analytic J_T against finite differences of T")


def check_converged_point(problem: ProblemTriple, params: SplitParams, z0: np.ndarray, max_iter: int) -> list:
    """
    Checks at the limit of a run: stationarity, classification, correspondence and local stability.
    """
    trajectory = run(problem, params, z0, tol=CHECK_RUN_TOL, max_iter=max_iter, record_envelope=False,
                     keep_records=False)
    if not trajectory.converged:
        return [CheckResult(name="converged_point", status=SKIP,
                            detail="run did not converge (%s)" % trajectory.status)]
    zstar = trajectory.final_z
    results = []
    grad_norm = float(np.linalg.norm(envelope.env_gradient(problem, params, zstar)))
    results.append(_measure("fixed_point_stationary", grad_norm, CRITICAL_RTOL * (1.0 + np.linalg.norm(zstar)),
                            "|grad env| at the limit of a run"))

    landmarks = problem.landmarks
    if landmarks is not None and len(landmarks.minimizers) == 1 and not landmarks.saddles:
        distance = float(np.linalg.norm(trajectory.final_x - landmarks.minimizers[0]))
        results.append(_measure("analytic_minimizer", distance, ANALYTIC_MINIMIZER_TOL,
                                "|prox_{gamma g}(z*) - argmin phi|"))

    try:
        report = analysis.classify(problem, params, zstar)
    except (HessianUnavailable, LocalSmoothnessViolated) as e:
        results.append(CheckResult(name="classification", status=SKIP, detail=str(e)))
        return results
    results.append(CheckResult(name="classification", status=PASS, value=report.classification,
                               detail="objective: %s" % report.phi_classification))
    if report.classification == analysis.ENV_LOCAL_MIN:
        correspondence = analysis.minimizer_correspondence_check(problem, params, zstar)
        results.append(_measure("minimizer_correspondence", correspondence.gap,
                                1e-7 * (1.0 + abs(correspondence.phi_value)), "|env(z*) - phi(x*)|"))

    try:
        bounds = analysis.step_bounds(problem, params)
    except ModeMismatch:
        return results
    if bounds.alpha_admissible:
        probe = analysis.diffeo_probe(problem, params, zstar)
        results.append(CheckResult(name="diffeo_probe", status=PASS if probe > 0 else FAIL, value=probe,
                                   threshold=0.0, detail="min Re lambda(J_T(z*)) with alpha below the bound"))
    stability = analysis.fixed_point_stability(problem, params, zstar)
    results.append(CheckResult(name="fixed_point_stability", status=PASS if stability.consistent else FAIL,
                               value=stability.spectral_radius, threshold=1.0,
                               detail="unstable=%s, envelope: %s" % (stability.unstable,
                                                                     stability.env_classification)))
    return results


def check_critical_points(problem: ProblemTriple, params: SplitParams, lo: float, hi: float) -> CheckResult:
    params = ensure_validated(problem, params)
    if not params.local_smoothness:
        return CheckResult(name="critical_points", status=SKIP,
                           detail="classification needs gamma L_f < 1 (gamma=%r, L_f=%r)" % (params.gamma, problem.L_f))
    discovery = search_critical_points(problem, params, lo=lo, hi=hi)
    labels = ", ".join(sorted(r.classification for r in discovery.reports)) or "none"
    if not discovery.complete:
        unclassified = "; ".join("z=%s %s" % (z.tolist(), error) for z, error in discovery.failures)
        return CheckResult(name="critical_points", status=FAIL, value=len(discovery.failures),
                           detail="classified: %s; unclassified: %s" % (labels, unclassified))
    return CheckResult(name="critical_points", status=PASS, value=len(discovery.reports),
                       detail="classified: %s" % labels)


def check_inf_equality(problem: ProblemTriple, params: SplitParams, lo: float, hi: float, points: int) -> CheckResult:
    report = analysis.inf_equality_check(problem, params, lo=lo, hi=hi, points=points)
    return _measure("inf_equality", report.gap, report.tolerance,
                    "grid min env %.6g at %s, grid min phi %.6g at %s"
                    % (report.env_min, report.env_argmin, report.phi_min, report.phi_argmin))


def run_suite(problem: ProblemTriple, params: SplitParams, samples: int, lo: float, hi: float, grid_points: int,
              seed: int, z0: np.ndarray, max_iter: int) -> list:
    """
    Run every applicable check.
    :return: List of CheckResult. A check that raises is reported as failed with the error as detail.
    """
    params = ensure_validated(problem, params)
    rng = np.random.default_rng(seed)
    points = _samples(rng, samples, problem.dimension, lo, hi)

    def guarded(name, fn, *args):
        try:
            value = fn(*args)
        except HessianUnavailable as e:
            return [CheckResult(name=name, status=SKIP, detail=str(e))]
        except DyeError as e:
            log.error("Check %s raised: %s", name, e)
            return [CheckResult(name=name, status=FAIL, detail="%s: %s" % (type(e).__name__, e))]
        return value if isinstance(value, list) else [value]

    results = []
    results += guarded("equivalence", check_equivalence, problem, params, points)
    results += guarded("sandwich", check_sandwich, problem, params, points)
    results += guarded("gradient_fd", check_gradient_fd, problem, params, points)
    results += guarded("metric_fd", check_metric_fd, problem, params, points)
    results += guarded("moreau", check_moreau, problem, params, points, seed)
    results += guarded("reductions", check_reductions, problem, params, points)
    results += guarded("jacobian_fd", check_jacobian, problem, params, points)
    results += guarded("converged_point", check_converged_point, problem, params, z0, max_iter)
    if problem.dimension <= 2:
        results += guarded("inf_equality", check_inf_equality, problem, params, lo, hi, grid_points)
        if problem.g.is_zero or problem.h.is_zero:
            results += guarded("critical_points", check_critical_points, problem, params, lo, hi)

    for r in results:
        log.info("check %-26s %s %s", r.name, r.status, "" if r.value is None else r.value)
    return results


def suite_passed(results: list) -> bool:
    return all(r.passed for r in results)
