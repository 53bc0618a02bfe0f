import numpy as np
import pytest

from dyestk import analysis
from dyestk.analysis import classify, alpha1_bound, alpha2_bound, step_bounds, default_alpha, jacobian_T, \
    jacobian_check, diffeo_probe, fixed_point_stability, minimizer_correspondence_check, sandwich_check, \
    inf_equality_check
from dyestk.exceptions import ModeMismatch, NotFixedPoint
from dyestk.registry import registry_make, quadratic_triple
from dyestk.saddle_lab import discover_saddles
from dyestk.splitting import SplitParams, run


def _saddle_fbs(alpha: float):
    return registry_make("saddle_quadratic", {"d": [1.0, -1.0]}), SplitParams(gamma=0.5, alpha=alpha, mode="FBS")


def test_classify_convex_minimizer():
    problem = registry_make("quadratic", {"Q": [2.0, 4.0], "b": [1.0, -1.0]})
    params = SplitParams(gamma=0.1, alpha=1.0)
    zstar = run(problem, params, np.zeros(2), tol=1e-13).final_z
    report = classify(problem, params, zstar)
    assert report.classification == analysis.ENV_LOCAL_MIN
    assert report.lambda_min_env > 0
    assert report.lambda_min_phi > 0
    assert report.phi_classification == analysis.PHI_LOCAL_MIN


def test_classify_strict_saddle():
    problem, params = _saddle_fbs(1.0)
    report = classify(problem, params, np.zeros(2))
    assert report.classification == analysis.ENV_STRICT_SADDLE
    assert report.lambda_min_env == pytest.approx(-2.0)
    assert report.lambda_min_phi == pytest.approx(-1.0)
    assert report.phi_classification == analysis.PHI_STRICT_SADDLE


def test_classify_not_critical():
    problem, params = _saddle_fbs(1.0)
    report = classify(problem, params, np.array([0.3, -0.8]))
    assert report.classification == analysis.ENV_NOT_CRITICAL
    assert not report.critical


def test_classify_general_dys():
    problem = registry_make("quadratic", {"Q": [2.0, 1.0], "assign": "all"})
    params = SplitParams(gamma=0.3, alpha=1.0)
    zstar = run(problem, params, np.ones(2), tol=1e-13).final_z
    report = classify(problem, params, zstar)
    assert report.classification == analysis.ENV_CRITICAL
    assert report.phi_classification == analysis.PHI_LOCAL_MIN


def test_alpha_bounds():
    assert alpha1_bound(0.1, 0.0, 0.0).infinite
    assert float(alpha1_bound(0.1, 1.0, 1.0)) == pytest.approx(2.0 / (1.0 - (0.9 / 1.1) ** 2))
    assert float(alpha1_bound(0.1, 1.0, 1.0)) == pytest.approx(6.05, abs=1e-4)
    assert float(alpha2_bound(0.1, 1.0, 1.0, 1.0)) == pytest.approx(5.5)
    assert alpha2_bound(0.1, 0.0, 0.0, 1.0).infinite


def test_step_bounds():
    problem = quadratic_triple(qf=np.diag([1.0, -1.0]), qg=np.diag([1.0, -1.0]))
    bounds = step_bounds(problem, SplitParams(gamma=0.1, alpha=1.0))
    assert bounds.mode == "DRS"
    assert float(bounds.alpha1) == pytest.approx(6.05, abs=1e-4)
    assert bounds.alpha2 is None
    assert bounds.alpha_admissible
    assert bounds.as_dict()["alpha1_vacuous"] is False

    zero_bounds = step_bounds(registry_make("zero"), SplitParams(gamma=0.5, alpha=10.0))
    assert zero_bounds.alpha_admissible
    assert zero_bounds.as_dict()["alpha1"] is None
    assert zero_bounds.as_dict()["alpha1_vacuous"]

    general = quadratic_triple(qf=np.eye(2), qg=np.eye(2), qh=np.eye(2))
    with pytest.raises(ModeMismatch):
        step_bounds(general, SplitParams(gamma=0.2, alpha=1.0))


def test_default_alpha():
    problem, _ = _saddle_fbs(1.0)
    assert default_alpha(problem, 0.5, "FBS") == pytest.approx(0.9)
    assert default_alpha(registry_make("zero"), 0.5) == pytest.approx(0.9)
    assert default_alpha(quadratic_triple(qh=np.diag([1.0, 10.0])), 0.05) == pytest.approx(0.9)


def test_jacobian_examples():
    zero = registry_make("zero")
    assert np.allclose(jacobian_T(zero, SplitParams(gamma=0.5, alpha=1.3), np.array([1.0, 2.0])), np.eye(2))

    gd = quadratic_triple(qh=np.eye(2))
    jac = jacobian_T(gd, SplitParams(gamma=0.5, alpha=1.2), np.array([0.3, -0.4]))
    assert np.allclose(jac, (1.0 - 1.2 * 0.5) * np.eye(2))

    problem, params = _saddle_fbs(2.7)
    assert np.allclose(jacobian_T(problem, params, np.zeros(2)), np.diag([0.1, 3.7]))


def test_jacobian_matches_fd():
    rng = np.random.default_rng(4)
    problems = [(quadratic_triple(qf=np.array([[1.0, 0.4], [0.4, -0.3]]), qg=np.array([[0.5, 0.1], [0.1, 1.0]])),
                 SplitParams(gamma=0.4, alpha=1.5)),
                (quadratic_triple(qf=np.eye(2), qh=np.diag([1.0, 3.0]),
                                  linear_map=np.array([[1.0, 0.5], [0.0, 1.0]])),
                 SplitParams(gamma=0.15, alpha=1.2)),
                (registry_make("quadratic", {"Q": [1.0, 2.0], "assign": "all"}), SplitParams(gamma=0.3, alpha=1.0))]
    for problem, params in problems:
        for _ in range(5):
            report = jacobian_check(problem, params, rng.uniform(-1.0, 1.0, problem.dimension))
            assert report.passed


def test_diffeo_probe():
    problem, _ = _saddle_fbs(1.0)
    assert diffeo_probe(registry_make("zero"), SplitParams(gamma=0.5, alpha=5.0), np.array([0.2, 0.1])) == \
        pytest.approx(1.0)

    below = SplitParams(gamma=0.5, alpha=0.9 * 3.0, mode="FBS")
    assert diffeo_probe(problem, below, np.zeros(2)) > 0
    above = SplitParams(gamma=0.5, alpha=1.5 * 3.0, mode="FBS")
    assert diffeo_probe(problem, above, np.zeros(2)) == pytest.approx(-0.5)

    with pytest.raises(NotFixedPoint):
        diffeo_probe(problem, below, np.array([0.5, 0.5]))


def test_fixed_point_stability():
    problem, params = _saddle_fbs(2.7)
    report = fixed_point_stability(problem, params, np.zeros(2))
    assert report.unstable
    assert report.spectral_radius == pytest.approx(3.7)
    assert report.stable_center_dim == 1
    assert report.env_classification == analysis.ENV_STRICT_SADDLE
    assert report.consistent

    convex = registry_make("quadratic", {"Q": [2.0, 4.0]})
    params = SplitParams(gamma=0.1, alpha=1.0)
    report = fixed_point_stability(convex, params, np.zeros(2))
    assert not report.unstable
    assert report.env_classification == analysis.ENV_LOCAL_MIN
    assert report.consistent


def test_minimizer_correspondence():
    q = np.array([[2.0, 0.5], [0.5, 1.0]])
    b = np.array([1.0, 2.0])
    problem = quadratic_triple(qf=0.5 * q, bf=0.5 * b, qg=0.5 * q, bg=0.5 * b)
    params = SplitParams(gamma=0.2, alpha=1.0)
    xstar = np.linalg.solve(q, b)
    zstar = xstar + params.gamma * (0.5 * q @ xstar - 0.5 * b)
    report = minimizer_correspondence_check(problem, params, zstar)
    assert report.gap <= 1e-9 * (1.0 + abs(report.phi_value))
    assert report.worst_descent == 0.0

    zero = registry_make("zero")
    assert minimizer_correspondence_check(zero, SplitParams(gamma=0.5, alpha=1.0), np.array([3.0, -1.0])).gap == 0.0


def test_sandwich():
    rng = np.random.default_rng(9)
    cases = ((registry_make("quadratic", {"Q": [2.0, 1.0], "assign": "all"}), SplitParams(gamma=0.3, alpha=1.0)),
             (registry_make("saddle_quadratic", {"d": [1.0, -1.0], "split": "fh"}),
              SplitParams(gamma=0.5, alpha=1.0)),
             (registry_make("quartic_well", {"n": 2, "split": "fg"}), SplitParams(gamma=0.3, alpha=1.0)))
    for problem, params in cases:
        for _ in range(50):
            assert sandwich_check(problem, params, rng.uniform(-2.0, 2.0, problem.dimension)).passed


def test_inf_equality():
    convex = registry_make("quadratic", {"Q": [2.0, 1.0], "b": [1.0, 0.5]})
    report = inf_equality_check(convex, SplitParams(gamma=0.2, alpha=1.0), lo=-2.0, hi=2.0, points=41)
    assert report.passed
    well = registry_make("quartic_well", {"n": 1})
    report = inf_equality_check(well, SplitParams(gamma=0.3, alpha=1.0), lo=-2.0, hi=2.0, points=201)
    assert report.passed
    assert abs(abs(report.phi_argmin[0]) - 1.0) < 0.05


def _at_relaxation_bound(problem, gamma: float, mode: str = None) -> SplitParams:
    bound = step_bounds(problem, SplitParams(gamma=gamma, alpha=1.0, mode=mode)).bound
    return SplitParams(gamma=gamma, alpha=0.9 * float(bound), mode=mode)


def test_classification_and_invertibility_at_critical_points():
    matching = {analysis.ENV_STRICT_SADDLE: analysis.PHI_STRICT_SADDLE, analysis.ENV_LOCAL_MIN: analysis.PHI_LOCAL_MIN}
    phase = registry_make("phase_toy", {"radius": 1.5})
    # phase_toy may have critical points besides its landmarks
    cases = [(registry_make("matfac_toy", {"radius": 1.2}), 0.15, "FBS", True)]
    cases += [(registry_make("quartic_well", {"n": 2, "split": split}), 0.05, None, True)
              for split in ("f", "fg", "fh")]
    cases += [(phase, 0.5 / phase.L_f, None, False)]
    for problem, gamma, mode, all_landmarks in cases:
        params = _at_relaxation_bound(problem, gamma, mode)
        reports = [r for r in discover_saddles(problem, params) if r.critical]
        assert reports
        for report in reports:
            assert matching[report.classification] == report.phi_classification
            assert diffeo_probe(problem, params, report.z) > 0
        if all_landmarks:
            for x in problem.landmarks.saddles + problem.landmarks.minimizers:
                assert any(np.linalg.norm(r.x - x) < 1e-6 for r in reports)
