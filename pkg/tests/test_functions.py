import numpy as np
import pytest

from dyestk.exceptions import UnknownProblem, BadParams, NonFiniteValue
from dyestk.functions import ProblemTriple, LinearMap, POS_INF, extended, phi_value, phi_gradient, phi_hessian, \
    zero_proxable, zero_smooth
from dyestk.registry import registry_make, quadratic_triple, quadratic_smooth, quadratic_proxable, PROBLEM_NAMES, \
    lipschitz_probe, prox_bounded_probe


def test_extended_real():
    assert extended(1.5) + 2.0 == 3.5
    assert (extended(1.0) + POS_INF).infinite
    assert extended(float("inf")) == POS_INF
    assert extended(3.0) < POS_INF
    assert not POS_INF < extended(1e300)
    with pytest.raises(NonFiniteValue):
        extended(float("nan"))
    with pytest.raises(NonFiniteValue):
        float(POS_INF)


def test_phi_value():
    zero = registry_make("zero", {"n": 3})
    assert float(phi_value(zero, np.array([1.0, -2.0, 3.0]))) == 0.0

    problem = quadratic_triple(qf=np.eye(2))
    assert float(phi_value(problem, np.array([1.0, 1.0]))) == pytest.approx(1.0)

    # f = 0, g = |x|^2 / 2, h = |y|^2 / 2, L = 2I
    problem = quadratic_triple(qg=np.eye(1), qh=np.eye(1), linear_map=2.0 * np.eye(1))
    assert float(phi_value(problem, np.array([1.0]))) == pytest.approx(2.5)


def test_phi_derivatives():
    rng = np.random.default_rng(3)
    lm = rng.standard_normal((3, 2))
    problem = quadratic_triple(qf=np.diag([1.0, 2.0]), qg=np.array([[2.0, 0.5], [0.5, 1.0]]), qh=np.eye(3),
                               linear_map=lm)
    x = rng.standard_normal(2)
    expected = np.diag([1.0, 2.0]) + np.array([[2.0, 0.5], [0.5, 1.0]]) + lm.T @ lm
    assert np.max(np.abs(phi_hessian(problem, x) - expected)) < 1e-12
    assert np.linalg.norm(phi_gradient(problem, x) - expected @ x) < 1e-12


def test_problem_constants():
    problem = registry_make("zero", {"n": 2})
    constants = problem.constants()
    assert constants["L_g"] == constants["L_h"] == constants["beta_f"] == constants["L_f"] == 0.0
    assert constants["L_norm"] == pytest.approx(1.0)
    assert problem.f.is_zero and problem.g.is_zero and problem.h.is_zero

    problem = registry_make("saddle_quadratic", {"d": [1.0, -1.0]})
    assert problem.beta_f == pytest.approx(1.0)
    assert problem.L_f == pytest.approx(1.0)
    assert problem.g.is_zero and problem.h.is_zero
    assert [p.tolist() for p in problem.landmarks.saddles] == [[0.0, 0.0]]

    problem = registry_make("quadratic", {"Q": [2.0, 4.0]})
    assert problem.L_g == pytest.approx(4.0)
    assert problem.f.is_zero and problem.h.is_zero
    assert np.allclose(problem.landmarks.minimizers[0], [0.0, 0.0])


def test_linear_map():
    lm = LinearMap(np.array([[1.0, 2.0, 0.0], [0.0, 1.0, 1.0]]))
    assert lm.shape == (2, 3)
    x, y = np.array([1.0, -1.0, 2.0]), np.array([0.5, 3.0])
    assert lm.apply(x) @ y == pytest.approx(x @ lm.adjoint(y))
    assert lm.op_norm == pytest.approx(np.linalg.norm(lm.matrix, 2))


def test_dimension_mismatch():
    with pytest.raises(BadParams):
        ProblemTriple(zero_proxable(2), zero_smooth(3), zero_smooth(2), LinearMap.identity(2))


def test_registry_errors():
    with pytest.raises(UnknownProblem):
        registry_make("rosenbrock")
    with pytest.raises(BadParams):
        registry_make("zero", {"n": 0})
    with pytest.raises(BadParams):
        registry_make("zero", {"n": 2, "dim": 3})
    with pytest.raises(BadParams):
        registry_make("quadratic", {"Q": [[1.0, 2.0], [0.0, 1.0]]})
    with pytest.raises(BadParams):
        registry_make("quadratic", {"Q": [1.0, -1.0], "convex": True})


def test_registry_builds_every_problem():
    for name in PROBLEM_NAMES:
        params = {"Q": [1.0, 2.0]} if name == "quadratic" else {}
        problem = registry_make(name, params)
        assert problem.name == name
        assert problem.dimension >= 1


def test_matfac_landmarks():
    problem = registry_make("matfac_toy")
    minimizers = sorted(p.tolist() for p in problem.landmarks.minimizers)
    assert np.allclose(minimizers, [[-1.0, 0.0], [1.0, 0.0]])
    assert len(problem.landmarks.saddles) == 3
    for x in problem.landmarks.minimizers + problem.landmarks.saddles:
        assert np.linalg.norm(phi_gradient(problem, x)) < 1e-12


def test_matfac_landmarks_with_repeated_top_eigenvalue():
    c, s = np.cos(0.7), np.sin(0.7)
    rotation = np.array([[c, -s], [s, c]])
    target = rotation @ np.diag([0.8, 0.8]) @ rotation.T
    problem = registry_make("matfac_toy", {"M": target.tolist()})
    assert len(problem.landmarks.minimizers) == 4
    assert len(problem.landmarks.saddles) == 1
    assert np.allclose(problem.landmarks.saddles[0], 0.0)
    for x in problem.landmarks.minimizers:
        assert np.isclose(np.linalg.norm(x), np.sqrt(0.8))


def test_declared_constants_hold():
    for name, params in (("logistic_smooth", {}), ("quadratic", {"Q": [[2.0, 1.0], [1.0, 3.0]], "assign": "h"})):
        problem = registry_make(name, params)
        for fn, declared, dim in ((problem.g, problem.L_g, problem.dimension),
                                  (problem.h, problem.L_h, problem.range_dimension)):
            if fn.is_zero:
                continue
            assert lipschitz_probe(fn.gradient, dim, samples=200) <= declared * (1.0 + 1e-9)


def test_prox_bounded_probe():
    assert prox_bounded_probe(quadratic_smooth(np.eye(2)).as_proxable(), [0.5, 1.0], dim=2)
    # -|x|^2/2 plus |x|^2/4 is unbounded below
    assert not prox_bounded_probe(quadratic_proxable(-np.eye(2)), [2.0], dim=2)
