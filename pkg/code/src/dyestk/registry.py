"""
Builtin test problems with analytically known smoothness constants, and probe-based sanity
checks for the constants of user supplied problems.
"""
import itertools
import logging

import numpy as np
import scipy.special

from dyestk.exceptions import UnknownProblem, BadParams
from dyestk.functions import SmoothFn, ProxableFn, LinearMap, ProblemTriple, POS_INF, zero_smooth, zero_proxable
from dyestk.linalg import sym_eigen, solve_linear, is_symmetric, operator_norm
from dyestk.util import unit_directions

log = logging.getLogger(__name__)


class Landmarks:
    """
    Known critical points of a builtin objective, in x-space.
    """

    def __init__(self, minimizers=None, saddles=None):
        self._minimizers = [np.asarray(p, dtype=float) for p in (minimizers or [])]
        self._saddles = [np.asarray(p, dtype=float) for p in (saddles or [])]

    @property
    def minimizers(self) -> list:
        return self._minimizers

    @property
    def saddles(self) -> list:
        return self._saddles


class _Params:
    """
    Typed access to a problem parameter map. Unused keys are reported by finish().
    """

    def __init__(self, problem: str, params: dict):
        self._problem = problem
        self._params = dict(params or {})
        self._used = set()

    def get(self, key, default=None):
        self._used.add(key)
        return self._params.get(key, default)

    def get_int(self, key, default: int, minimum: int = 1) -> int:
        value = self.get(key, default)
        if isinstance(value, bool) or not isinstance(value, (int, np.integer)) or value < minimum:
            raise BadParams(self._problem, "%s must be an integer >= %d" % (key, minimum), key=key)
        return int(value)

    def get_float(self, key, default: float, positive: bool = False) -> float:
        value = self.get(key, default)
        if isinstance(value, bool) or not isinstance(value, (int, float, np.number)) or not np.isfinite(value):
            raise BadParams(self._problem, "%s must be a finite number" % key, key=key)
        if positive and value <= 0:
            raise BadParams(self._problem, "%s must be positive" % key, key=key)
        return float(value)

    def get_choice(self, key, default: str, choices) -> str:
        value = self.get(key, default)
        if value not in choices:
            raise BadParams(self._problem, "%s must be one of %s" % (key, ", ".join(choices)), key=key)
        return value

    def get_vector(self, key, default=None, size: int = None):
        value = self.get(key, default)
        if value is None:
            return None
        arr = np.asarray(value, dtype=float)
        if arr.ndim != 1 or not np.all(np.isfinite(arr)) or (size is not None and arr.size != size):
            raise BadParams(self._problem, "%s must be a finite vector%s" % (
                key, "" if size is None else " of length %d" % size), key=key)
        return arr

    def get_matrix(self, key, default=None):
        """
        Square matrix; a flat list is read as a diagonal.
        """
        value = self.get(key, default)
        if value is None:
            return None
        arr = np.asarray(value, dtype=float)
        if arr.ndim == 1:
            arr = np.diag(arr)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1] or not np.all(np.isfinite(arr)):
            raise BadParams(self._problem, "%s must be a finite square matrix or a diagonal list" % key, key=key)
        return arr

    def finish(self) -> None:
        unknown = sorted(set(self._params) - self._used)
        if unknown:
            raise BadParams(self._problem, "unknown parameter(s): %s" % ", ".join(unknown), key=unknown[0])

    def as_dict(self) -> dict:
        return dict(self._params)


# Quadratic building blocks

def _check_quadratic(problem: str, q: np.ndarray, label: str) -> None:
    if not is_symmetric(q):
        raise BadParams(problem, "%s must be symmetric" % label)


def _quadratic_prox(q: np.ndarray, b: np.ndarray):
    n = q.shape[0]

    def prox(gamma, z):
        return solve_linear(np.eye(n) + gamma * q, np.asarray(z, dtype=float) + gamma * b)

    return prox


def quadratic_smooth(q, b=None, name: str = "quadratic") -> SmoothFn:
    """
    Smooth quadratic 1/2 x^T Q x - b^T x.
    """
    q = np.asarray(q, dtype=float)
    n = q.shape[0]
    b = np.zeros(n) if b is None else np.asarray(b, dtype=float)
    eigenvalues = sym_eigen(q)[0]
    return SmoothFn(value=lambda x: 0.5 * x @ q @ x - b @ x, gradient=lambda x: q @ x - b,
                    lipschitz_grad=float(np.max(np.abs(eigenvalues))), hessian=lambda x: q,
                    closed_form_prox=_quadratic_prox(q, b), name=name)


def quadratic_proxable(q, b=None, name: str = "quadratic") -> ProxableFn:
    """
    Weakly convex quadratic 1/2 x^T Q x - b^T x with beta = max(0, -lambda_min(Q)).
    """
    q = np.asarray(q, dtype=float)
    n = q.shape[0]
    b = np.zeros(n) if b is None else np.asarray(b, dtype=float)
    eigenvalues = sym_eigen(q)[0]
    return ProxableFn(value=lambda x: 0.5 * x @ q @ x - b @ x, weak_convexity=max(0.0, -float(eigenvalues[0])),
                      gradient=lambda x: q @ x - b, closed_form_prox=_quadratic_prox(q, b), hessian_at=lambda x: q,
                      lipschitz_hess_bound=float(np.max(np.abs(eigenvalues))), name=name)


def box_indicator(lo: float, hi: float, n: int) -> ProxableFn:
    """
    Indicator of the box [lo, hi]^n. Twice differentiable (with zero Hessian) only in the interior.
    """

    def value(x):
        return 0.0 if np.all(x >= lo) and np.all(x <= hi) else POS_INF

    def interior(x):
        return np.all(x > lo) and np.all(x < hi)

    return ProxableFn(value=value, weak_convexity=0.0,
                      gradient=lambda x: np.zeros(n) if interior(x) else None,
                      closed_form_prox=lambda gamma, z: np.clip(z, lo, hi),
                      hessian_at=lambda x: np.zeros((n, n)) if interior(x) else None,
                      lipschitz_hess_bound=0.0, name="box")


def quadratic_triple(qf=None, qg=None, qh=None, linear_map=None, bf=None, bg=None, bh=None, n: int = None,
                     name: str = "quadratic", params: dict = None, landmarks: Landmarks = None) -> ProblemTriple:
    """
    Problem whose three parts are quadratics; None parts are identically zero.
    :param qf: Hessian of f (n x n) or None.
    :param qg: Hessian of g (n x n) or None.
    :param qh: Hessian of h (m x m) or None.
    :param linear_map: m x n matrix (identity when None).
    :param bf: Linear term of f.
    :param bg: Linear term of g.
    :param bh: Linear term of h.
    :param n: Dimension, needed only when every quadratic is None.
    """
    if n is None:
        for q in (qf, qg):
            if q is not None:
                n = np.asarray(q).shape[0]
                break
        else:
            n = np.asarray(linear_map).shape[1] if linear_map is not None else np.asarray(qh).shape[0]
    lm = LinearMap(np.eye(n) if linear_map is None else linear_map)
    m = lm.shape[0]
    for q, label in ((qf, "Q_f"), (qg, "Q_g"), (qh, "Q_h")):
        if q is not None:
            _check_quadratic(name, np.asarray(q, dtype=float), label)
    f = zero_proxable(n) if qf is None and bf is None else \
        quadratic_proxable(np.zeros((n, n)) if qf is None else qf, bf, name="f")
    g = zero_smooth(n) if qg is None and bg is None else \
        quadratic_smooth(np.zeros((n, n)) if qg is None else qg, bg, name="g")
    h = zero_smooth(m) if qh is None and bh is None else \
        quadratic_smooth(np.zeros((m, m)) if qh is None else qh, bh, name="h")
    return ProblemTriple(f, g, h, lm, name=name, params=params, landmarks=landmarks)


# Builtin problems

def _make_zero(p: _Params) -> ProblemTriple:
    n = p.get_int("n", 2)
    p.finish()
    return ProblemTriple(zero_proxable(n), zero_smooth(n), zero_smooth(n), LinearMap.identity(n), name="zero",
                         params=p.as_dict())


_ASSIGN_WEIGHTS = {"f": (1.0, 0.0, 0.0), "g": (0.0, 1.0, 0.0), "h": (0.0, 0.0, 1.0),
                   "all": (1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0)}


def _make_quadratic(p: _Params) -> ProblemTriple:
    q = p.get_matrix("Q")
    if q is None:
        raise BadParams("quadratic", "Q is required", key="Q")
    n = q.shape[0]
    _check_quadratic("quadratic", q, "Q")
    b = p.get_vector("b", np.zeros(n), size=n)
    weights = p.get("weights")
    if weights is not None:
        if not isinstance(weights, dict) or set(weights) - {"f", "g", "h"}:
            raise BadParams("quadratic", "weights must map f/g/h to numbers", key="weights")
        wf, wg, wh = (float(weights.get(k, 0.0)) for k in ("f", "g", "h"))
        p.get("assign")
    else:
        wf, wg, wh = _ASSIGN_WEIGHTS[p.get_choice("assign", "g", tuple(_ASSIGN_WEIGHTS))]
    eigenvalues = sym_eigen(q)[0]
    if p.get("convex", False) and eigenvalues[0] < -1e-12:
        raise BadParams("quadratic", "Q is not positive semidefinite (lambda_min=%g) but convex was declared"
                        % eigenvalues[0], key="Q")
    box = p.get("box")
    p.finish()

    landmarks = None
    if box is None and eigenvalues[0] > 0:
        landmarks = Landmarks(minimizers=[solve_linear(q, b)])
    triple = quadratic_triple(qf=wf * q if wf else None, qg=wg * q if wg else None, qh=wh * q if wh else None,
                              bf=wf * b if wf else None, bg=wg * b if wg else None, bh=wh * b if wh else None,
                              n=n, name="quadratic", params=p.as_dict(), landmarks=landmarks)
    if box is None:
        return triple
    if wf:
        raise BadParams("quadratic", "box constraint is the f part; assign the quadratic to g and/or h", key="box")
    if not isinstance(box, (list, tuple)) or len(box) != 2 or not box[0] < box[1]:
        raise BadParams("quadratic", "box must be [lo, hi] with lo < hi", key="box")
    return ProblemTriple(box_indicator(float(box[0]), float(box[1]), n), triple.g, triple.h, triple.L,
                         name="quadratic", params=p.as_dict())


def _make_saddle_quadratic(p: _Params) -> ProblemTriple:
    d = p.get_vector("d", [1.0, -1.0])
    split = p.get_choice("split", "f", ("f", "fg", "fh"))
    p.finish()
    n = d.size
    if np.any(d < 0):
        landmarks = Landmarks(saddles=[np.zeros(n)])
    elif np.all(d > 0):
        landmarks = Landmarks(minimizers=[np.zeros(n)])
    else:
        landmarks = Landmarks()
    if split == "f":
        return quadratic_triple(qf=np.diag(d), n=n, name="saddle_quadratic", params=p.as_dict(), landmarks=landmarks)
    negative = np.diag(np.minimum(d, 0.0))
    positive = np.diag(np.maximum(d, 0.0))
    if split == "fg":
        return quadratic_triple(qf=negative, qg=positive, n=n, name="saddle_quadratic", params=p.as_dict(),
                                landmarks=landmarks)
    return quadratic_triple(qf=negative, qh=positive, n=n, name="saddle_quadratic", params=p.as_dict(),
                            landmarks=landmarks)


def _quartic_landmarks(n: int, a: float) -> Landmarks:
    minimizers, saddles = [], []
    if n > 4:
        return Landmarks()
    root = np.sqrt(a)
    for point in itertools.product((-root, 0.0, root), repeat=n):
        point = np.array(point)
        (saddles if np.any(point == 0.0) else minimizers).append(point)
    return Landmarks(minimizers=minimizers, saddles=saddles)


def _make_quartic_well(p: _Params) -> ProblemTriple:
    n = p.get_int("n", 1)
    a = p.get_float("a", 1.0, positive=True)
    radius = p.get_float("radius", 2.0, positive=True)
    split = p.get_choice("split", "f", ("f", "fg", "fh"))
    p.finish()
    landmarks = _quartic_landmarks(n, a)
    if split == "f":
        f = ProxableFn(value=lambda x: 0.25 * np.sum((x ** 2 - a) ** 2), weak_convexity=a,
                       gradient=lambda x: x ** 3 - a * x, hessian_at=lambda x: np.diag(3.0 * x ** 2 - a),
                       lipschitz_hess_bound=max(3.0 * radius ** 2 - a, a), name="quartic_well")
        return ProblemTriple(f, zero_smooth(n), zero_smooth(n), LinearMap.identity(n), name="quartic_well",
                             params=p.as_dict(), landmarks=landmarks)
    f = ProxableFn(value=lambda x: 0.25 * np.sum(x ** 4), weak_convexity=0.0, gradient=lambda x: x ** 3,
                   hessian_at=lambda x: np.diag(3.0 * x ** 2), lipschitz_hess_bound=3.0 * radius ** 2, name="quartic")
    concave = SmoothFn(value=lambda x: np.sum(-0.5 * a * x ** 2 + 0.25 * a ** 2), gradient=lambda x: -a * x,
                       lipschitz_grad=a, hessian=lambda x: -a * np.eye(x.size),
                       closed_form_prox=lambda gamma, z: np.asarray(z, dtype=float) / (1.0 - gamma * a),
                       name="concave")
    if split == "fg":
        return ProblemTriple(f, concave, zero_smooth(n), LinearMap.identity(n), name="quartic_well",
                             params=p.as_dict(), landmarks=landmarks)
    return ProblemTriple(f, zero_smooth(n), concave, LinearMap.identity(n), name="quartic_well",
                         params=p.as_dict(), landmarks=landmarks)


def l1_norm(lam: float, n: int) -> ProxableFn:
    """
    lam |x|_1 with soft-thresholding prox; smooth only away from the coordinate axes.
    """

    def smooth_at(x):
        return np.all(x != 0.0)

    return ProxableFn(value=lambda x: lam * np.sum(np.abs(x)), weak_convexity=0.0,
                      gradient=lambda x: lam * np.sign(x) if smooth_at(x) else None,
                      closed_form_prox=lambda gamma, z: np.sign(z) * np.maximum(np.abs(z) - gamma * lam, 0.0),
                      hessian_at=lambda x: np.zeros((n, n)) if smooth_at(x) else None,
                      lipschitz_hess_bound=0.0, name="l1")


def _make_logistic_smooth(p: _Params) -> ProblemTriple:
    n = p.get_int("n", 3, minimum=2)
    samples = p.get_int("samples", 20)
    lam = p.get_float("lam", 0.1)
    mu = p.get_float("mu", 0.5)
    seed = p.get_int("seed", 0, minimum=0)
    p.finish()
    if lam < 0 or mu < 0:
        raise BadParams("logistic_smooth", "lam and mu must be non-negative")

    rng = np.random.default_rng(seed)
    features = rng.standard_normal((samples, n))
    w_true = rng.standard_normal(n)
    labels = np.where(features @ w_true + 0.1 * rng.standard_normal(samples) >= 0.0, 1.0, -1.0)
    margins_matrix = labels[:, None] * features

    def value(x):
        return float(np.mean(np.logaddexp(0.0, -margins_matrix @ x)))

    def gradient(x):
        s = scipy.special.expit(-margins_matrix @ x)
        return -(margins_matrix.T @ s) / samples

    def hessian(x):
        s = scipy.special.expit(margins_matrix @ x)
        weights = s * (1.0 - s)
        return (features.T * weights) @ features / samples

    lipschitz = operator_norm(features) ** 2 / (4.0 * samples)
    g = SmoothFn(value=value, gradient=gradient, lipschitz_grad=lipschitz, hessian=hessian, name="logistic")
    differences = np.diff(np.eye(n), axis=0)
    h = quadratic_smooth(mu * np.eye(n - 1), name="ridge") if mu > 0 else zero_smooth(n - 1)
    f = l1_norm(lam, n) if lam > 0 else zero_proxable(n)
    return ProblemTriple(f, g, h, LinearMap(differences), name="logistic_smooth", params=p.as_dict())


def _make_matfac_toy(p: _Params) -> ProblemTriple:
    target = p.get_matrix("M", [[1.0, 0.0], [0.0, 0.5]])
    radius = p.get_float("radius", 2.0, positive=True)
    p.finish()
    if not is_symmetric(target):
        raise BadParams("matfac_toy", "M must be symmetric", key="M")
    n = target.shape[0]
    eigenvalues, eigenvectors = sym_eigen(target)

    def value(x):
        residual = np.outer(x, x) - target
        return 0.25 * float(np.sum(residual * residual))

    def gradient(x):
        return (np.outer(x, x) - target) @ x

    def hessian(x):
        return (x @ x) * np.eye(n) + 2.0 * np.outer(x, x) - target

    saddles, minimizers = [np.zeros(n)], []
    top = eigenvalues[-1]
    for lam, v in zip(eigenvalues, eigenvectors.T):
        if lam <= 0:
            continue
        points = [np.sqrt(lam) * v, -np.sqrt(lam) * v]
        (minimizers if np.isclose(lam, top) else saddles).extend(points)
    f = ProxableFn(value=value, weak_convexity=max(0.0, float(top)), gradient=gradient, hessian_at=hessian,
                   lipschitz_hess_bound=3.0 * radius ** 2 + float(np.max(np.abs(eigenvalues))), name="matfac")
    return ProblemTriple(f, zero_smooth(n), zero_smooth(n), LinearMap.identity(n), name="matfac_toy",
                         params=p.as_dict(), landmarks=Landmarks(minimizers=minimizers, saddles=saddles))


def _make_phase_toy(p: _Params) -> ProblemTriple:
    n = p.get_int("n", 2)
    measurements = p.get_int("measurements", 8)
    x_true = p.get_vector("x_true", np.r_[1.0, 0.5, np.zeros(max(n - 2, 0))][:n], size=n)
    radius = p.get_float("radius", 2.0, positive=True)
    seed = p.get_int("seed", 0, minimum=0)
    p.finish()

    sensing = np.random.default_rng(seed).standard_normal((measurements, n))
    observed = (sensing @ x_true) ** 2

    def value(x):
        return 0.25 * float(np.mean(((sensing @ x) ** 2 - observed) ** 2))

    def gradient(x):
        ax = sensing @ x
        return sensing.T @ ((ax ** 2 - observed) * ax) / measurements

    def hessian(x):
        ax = sensing @ x
        return (sensing.T * (3.0 * ax ** 2 - observed)) @ sensing / measurements

    beta = max(0.0, float(sym_eigen((sensing.T * observed) @ sensing / measurements)[0][-1]))
    row_norms = np.sum(sensing ** 2, axis=1)
    bound = operator_norm((sensing.T * (3.0 * radius ** 2 * row_norms + observed)) @ sensing / measurements)
    f = ProxableFn(value=value, weak_convexity=beta, gradient=gradient, hessian_at=hessian,
                   lipschitz_hess_bound=bound, name="phase")
    return ProblemTriple(f, zero_smooth(n), zero_smooth(n), LinearMap.identity(n), name="phase_toy",
                         params=p.as_dict(),
                         landmarks=Landmarks(minimizers=[x_true, -x_true], saddles=[np.zeros(n)]))


_BUILDERS = {
    "zero": _make_zero,
    "quadratic": _make_quadratic,
    "saddle_quadratic": _make_saddle_quadratic,
    "quartic_well": _make_quartic_well,
    "logistic_smooth": _make_logistic_smooth,
    "matfac_toy": _make_matfac_toy,
    "phase_toy": _make_phase_toy,
}

PROBLEM_NAMES = tuple(_BUILDERS)


def registry_make(name: str, params: dict = None) -> ProblemTriple:
    """
    Build a registered problem.
    :param name: Problem name.
    :param params: Problem parameters.
    :return: ProblemTriple with precomputed constants.
    """
    if name not in _BUILDERS:
        raise UnknownProblem(name, PROBLEM_NAMES)
    problem = _BUILDERS[name](_Params(name, params))
    log.debug("Built problem %s with constants %s", name, problem.constants())
    return problem


# Probe-based sanity checks of declared constants

def lipschitz_probe(gradient, dim: int, samples: int = 1000, radius: float = 2.0, seed: int = 0) -> float:
    """
    Largest observed |grad(x) - grad(y)| / |x - y| over random pairs in the box [-radius, radius]^dim.
    """
    rng = np.random.default_rng(seed)
    best = 0.0
    for _ in range(samples):
        x = rng.uniform(-radius, radius, dim)
        y = rng.uniform(-radius, radius, dim)
        gap = np.linalg.norm(x - y)
        if gap == 0.0:
            continue
        best = max(best, np.linalg.norm(np.asarray(gradient(x)) - np.asarray(gradient(y))) / gap)
    return float(best)


def prox_bounded_probe(f: ProxableFn, gammas, dim: int, samples: int = 200, radius: float = 1.0, shells: int = 6,
                       seed: int = 0) -> bool:
    """
    Probe that f + |.|^2/(2 gamma) does not decrease along growing shells for each gamma.
    :return: True when every gamma passes.
    """
    rng = np.random.default_rng(seed)
    for gamma in gammas:
        shell_minima = []
        for k in range(shells):
            r = radius * 2.0 ** k
            directions = unit_directions(rng, samples, dim)
            values = [f.value(r * u) for u in directions]
            finite = [float(v) for v in values if v.is_finite]
            if finite:
                shell_minima.append(min(finite) + r ** 2 / (2.0 * gamma))
        if len(shell_minima) >= 2 and shell_minima[-1] < shell_minima[-2]:
            log.warning("Prox-boundedness probe failed for %s at gamma=%g", f.name, gamma)
            return False
    return True
