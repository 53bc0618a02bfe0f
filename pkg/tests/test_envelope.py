import numpy as np
import pytest

from dyestk.envelope import env_value, env_gradient, env_metric, env_hessian_at_critical, evaluate, \
    equivalence_check
from dyestk.exceptions import NotCritical
from dyestk.linalg import fd_gradient, fd_hessian
from dyestk.registry import registry_make, quadratic_triple
from dyestk.splitting import SplitParams, run


def _random_triple(rng: np.random.Generator, n: int, m: int):
    def spd(k, shift):
        a = rng.standard_normal((k, k))
        return a @ a.T / k + shift * np.eye(k)

    lm = rng.standard_normal((m, n)) / np.sqrt(n)
    qf = spd(n, 0.1) - 0.5 * np.eye(n)
    return quadratic_triple(qf=qf, qg=spd(n, 0.1), qh=spd(m, 0.1), linear_map=lm, bf=rng.standard_normal(n),
                            bg=rng.standard_normal(n), bh=rng.standard_normal(m))


def _admissible_gamma(problem) -> float:
    limits = [1.0 / problem.smooth_constant]
    if problem.beta_f > 0:
        limits.append(1.0 / problem.beta_f)
    return 0.5 * min(limits)


def test_env_value_examples():
    zero = registry_make("zero")
    assert env_value(zero, SplitParams(gamma=0.5, alpha=1.0), np.array([0.7, -3.0])) == 0.0

    gd = quadratic_triple(qh=np.eye(1))
    assert env_value(gd, SplitParams(gamma=0.5, alpha=1.0), np.array([1.0])) == pytest.approx(0.25)

    g_only = quadratic_triple(qg=np.eye(1))
    assert env_value(g_only, SplitParams(gamma=0.5, alpha=1.0), np.array([1.0])) == pytest.approx(1.0 / 9.0)


def test_env_metric_examples():
    params = SplitParams(gamma=0.5, alpha=1.0)
    assert np.allclose(env_metric(registry_make("zero"), params, np.array([1.0, 2.0])), np.eye(2))
    assert env_metric(quadratic_triple(qg=np.eye(1)), params, np.array([1.0]))[0, 0] == pytest.approx(1.0 / 3.0)
    assert env_metric(quadratic_triple(qh=np.eye(1)), params, np.array([1.0]))[0, 0] == pytest.approx(0.5)


def test_env_gradient_examples():
    gd = quadratic_triple(qh=np.eye(1))
    assert env_gradient(gd, SplitParams(gamma=0.5, alpha=1.0), np.array([1.0]))[0] == pytest.approx(0.5)

    # gradient vanishes at a fixed point
    problem = quadratic_triple(qf=np.eye(1), bf=np.array([1.0]), qg=np.eye(1))
    params = SplitParams(gamma=0.5, alpha=1.0)
    trajectory = run(problem, params, np.array([3.0]), tol=1e-13)
    assert np.linalg.norm(env_gradient(problem, params, trajectory.final_z)) < 1e-10


def test_env_gradient_matches_fd():
    rng = np.random.default_rng(11)
    for _ in range(3):
        problem = _random_triple(rng, 3, 2)
        params = SplitParams(gamma=_admissible_gamma(problem), alpha=1.0)
        for _ in range(5):
            z = rng.uniform(-2.0, 2.0, 3)
            analytic = env_gradient(problem, params, z)
            numeric = fd_gradient(lambda v: env_value(problem, params, v), z)
            assert np.linalg.norm(analytic - numeric) <= 1e-5 * (1.0 + np.linalg.norm(analytic))


def test_env_hessian_examples():
    zero = registry_make("zero")
    hessian = env_hessian_at_critical(zero, SplitParams(gamma=0.5, alpha=1.0), np.array([1.0, -1.0]))
    assert np.allclose(hessian, np.zeros((2, 2)))

    saddle = registry_make("saddle_quadratic", {"d": [1.0, -1.0]})
    hessian = env_hessian_at_critical(saddle, SplitParams(gamma=0.5, alpha=1.0, mode="FBS"), np.zeros(2))
    assert np.allclose(hessian, np.diag([2.0 / 3.0, -2.0]))


def test_env_hessian_matches_fd():
    problem = quadratic_triple(qf=np.eye(1), bf=np.array([1.0]), qg=np.eye(1))
    params = SplitParams(gamma=0.5, alpha=1.0)
    zstar = run(problem, params, np.array([0.0]), tol=1e-14).final_z
    analytic = env_hessian_at_critical(problem, params, zstar)
    numeric = fd_hessian(lambda v: env_value(problem, params, v), zstar)
    assert np.max(np.abs(analytic - numeric)) < 1e-4


def test_env_hessian_needs_critical_point():
    saddle = registry_make("saddle_quadratic", {"d": [1.0, -1.0]})
    with pytest.raises(NotCritical):
        env_hessian_at_critical(saddle, SplitParams(gamma=0.5, alpha=1.0), np.array([0.5, 0.5]))


def test_evaluate():
    saddle = registry_make("saddle_quadratic", {"d": [1.0, -1.0]})
    params = SplitParams(gamma=0.5, alpha=1.0)
    away = evaluate(saddle, params, np.array([0.5, 0.5]))
    assert away.hessian is None
    assert away.gradient_norm > 0
    at_saddle = evaluate(saddle, params, np.zeros(2))
    assert at_saddle.hessian is not None
    assert at_saddle.value == 0.0


def test_equivalence():
    rng = np.random.default_rng(2)
    problems = [registry_make("zero", {"n": 3}), _random_triple(rng, 5, 5), _random_triple(rng, 4, 2)]
    for problem in problems:
        gamma = _admissible_gamma(problem) if problem.smooth_constant > 0 else 0.5
        params = SplitParams(gamma=gamma, alpha=1.4)
        for _ in range(20):
            z = rng.uniform(-3.0, 3.0, problem.dimension)
            assert equivalence_check(problem, params, z) <= 1e-9 * (1.0 + np.linalg.norm(z))

    matfac = registry_make("matfac_toy")
    params = SplitParams(gamma=0.2, alpha=1.0, mode="FBS")
    for _ in range(20):
        z = rng.uniform(-1.0, 1.0, 2)
        assert equivalence_check(matfac, params, z) <= 1e-9 * (1.0 + np.linalg.norm(z))


def test_equivalence_on_registry_problems():
    rng = np.random.default_rng(4)
    logistic = registry_make("logistic_smooth")
    cases = ((registry_make("zero", {"n": 2}), SplitParams(gamma=0.5, alpha=1.4)),
             (registry_make("quadratic", {"Q": [2.0, 1.0], "assign": "all"}), SplitParams(gamma=0.3, alpha=1.0)),
             (registry_make("saddle_quadratic", {"d": [1.0, -1.0], "split": "fg"}), SplitParams(gamma=0.5, alpha=1.0)),
             (registry_make("quartic_well", {"n": 2, "split": "fh"}), SplitParams(gamma=0.05, alpha=1.0)),
             (logistic, SplitParams(gamma=_admissible_gamma(logistic), alpha=1.0)),
             (registry_make("phase_toy"), SplitParams(gamma=0.1, alpha=1.0)),
             (registry_make("matfac_toy", {"radius": 1.2}), SplitParams(gamma=0.15, alpha=1.5, mode="FBS")))
    for problem, params in cases:
        for _ in range(100):
            z = rng.uniform(-1.5, 1.5, problem.dimension)
            assert equivalence_check(problem, params, z) <= 1e-8 * (1.0 + np.linalg.norm(z))


def test_env_hessian_matches_fd_at_matfac_critical_points():
    problem = registry_make("matfac_toy", {"radius": 1.2})
    params = SplitParams(gamma=0.15, alpha=1.5, mode="FBS")
    landmarks = problem.landmarks
    assert len(landmarks.saddles) == 3 and len(landmarks.minimizers) == 2
    for zstar in landmarks.saddles + landmarks.minimizers:
        analytic = env_hessian_at_critical(problem, params, zstar)
        numeric = fd_hessian(lambda v: env_value(problem, params, v), zstar)
        assert np.max(np.abs(analytic - numeric)) < 1e-4
