import functools
import logging
from dataclasses import dataclass

import numpy as np

from dyestk.exceptions import BadParams, NonFiniteValue, HessianUnavailable
from dyestk.linalg import as_vec, as_mat, operator_norm, fd_jacobian, symmetrize

log = logging.getLogger(__name__)


@functools.total_ordering
@dataclass(frozen=True)
class ExtendedReal:
    """
    A value in R u {+inf}. +inf is carried by the flag, never by a floating infinity.
    """
    value: float = 0.0
    infinite: bool = False

    @property
    def is_finite(self) -> bool:
        return not self.infinite

    def __add__(self, other):
        other = extended(other)
        if self.infinite or other.infinite:
            return POS_INF
        return ExtendedReal(self.value + other.value)

    __radd__ = __add__

    def __float__(self):
        if self.infinite:
            raise NonFiniteValue("extended real conversion (+inf)")
        return self.value

    def __eq__(self, other):
        if not isinstance(other, (ExtendedReal, int, float, np.floating)):
            return NotImplemented
        other = extended(other)
        if self.infinite or other.infinite:
            return self.infinite == other.infinite
        return self.value == other.value

    def __lt__(self, other):
        other = extended(other)
        if self.infinite:
            return False
        if other.infinite:
            return True
        return self.value < other.value

    def __hash__(self):
        return hash((self.value, self.infinite))

    def __repr__(self):
        return "+inf" if self.infinite else repr(self.value)


POS_INF = ExtendedReal(0.0, True)


def extended(v) -> ExtendedReal:
    """
    Lift a float (or ExtendedReal) into the extended reals.
    """
    if isinstance(v, ExtendedReal):
        return v
    v = float(v)
    if np.isnan(v):
        raise NonFiniteValue("extended real lift (NaN)")
    if np.isinf(v):
        if v < 0:
            raise NonFiniteValue("extended real lift (-inf)")
        return POS_INF
    return ExtendedReal(v)


class SmoothFn:
    """
    A Lipschitz differentiable function (g or h).
    """

    def __init__(self, value, gradient, lipschitz_grad: float, hessian=None, closed_form_prox=None,
                 name: str = "smooth", is_zero: bool = False):
        """
        Initialize a smooth function.
        :param value: x -> float
        :param gradient: x -> vector
        :param lipschitz_grad: Lipschitz constant of the gradient.
        :param hessian: Optional x -> symmetric matrix.
        :param closed_form_prox: Optional (gamma, z) -> prox_{gamma fn}(z).
        :param name: Name used in logs and reports.
        :param is_zero: Specify true for the identically zero function.
        """
        assert callable(value) and callable(gradient)
        assert lipschitz_grad >= 0
        self._value = value
        self._gradient = gradient
        self._lipschitz_grad = float(lipschitz_grad)
        self._hessian = hessian
        self._closed_form_prox = closed_form_prox
        self._name = name
        self._is_zero = is_zero

    @property
    def name(self) -> str:
        return self._name

    @property
    def is_zero(self) -> bool:
        return self._is_zero

    @property
    def lipschitz_grad(self) -> float:
        return self._lipschitz_grad

    @property
    def closed_form_prox(self):
        return self._closed_form_prox

    def value(self, x) -> float:
        return float(self._value(x))

    def gradient(self, x) -> np.ndarray:
        return np.asarray(self._gradient(x), dtype=float)

    def hessian(self, x) -> np.ndarray:
        """
        Hessian at x. Falls back to a symmetrized finite-difference Jacobian of the gradient.
        """
        if self._hessian is not None:
            return as_mat(self._hessian(x), self._name + " hessian")
        return symmetrize(fd_jacobian(self.gradient, x))

    def as_proxable(self) -> "ProxableFn":
        """
        View as a proximable function. An L-smooth function is L-weakly convex.
        """
        return ProxableFn(value=self._value, weak_convexity=self._lipschitz_grad, gradient=self._gradient,
                          closed_form_prox=self._closed_form_prox, hessian_at=self._hessian,
                          lipschitz_hess_bound=self._lipschitz_grad, name=self._name, is_zero=self._is_zero)

    def __repr__(self):
        return "SmoothFn(%s, L=%g)" % (self._name, self._lipschitz_grad)


class ProxableFn:
    """
    A weakly convex, prox-bounded function (f). Values may be +inf outside the domain.
    """

    def __init__(self, value, weak_convexity: float = 0.0, gradient=None, closed_form_prox=None, hessian_at=None,
                 lipschitz_hess_bound: float = None, name: str = "proxable", is_zero: bool = False):
        """
        Initialize a proximable function.
        :param value: x -> float or POS_INF.
        :param weak_convexity: beta such that fn + beta/2 |.|^2 is convex.
        :param gradient: Optional x -> vector (None where undefined). Needed by the Newton prox.
        :param closed_form_prox: Optional (gamma, z) -> prox_{gamma fn}(z).
        :param hessian_at: Optional x -> matrix, or None where fn is not twice differentiable.
        :param lipschitz_hess_bound: Optional bound L_f on |hessian| near critical points.
        :param name: Name used in logs and reports.
        :param is_zero: Specify true for the identically zero function.
        """
        assert callable(value)
        assert weak_convexity >= 0
        self._value = value
        self._weak_convexity = float(weak_convexity)
        self._gradient = gradient
        self._closed_form_prox = closed_form_prox
        self._hessian_at = hessian_at
        self._lipschitz_hess_bound = None if lipschitz_hess_bound is None else float(lipschitz_hess_bound)
        self._name = name
        self._is_zero = is_zero

    @property
    def name(self) -> str:
        return self._name

    @property
    def is_zero(self) -> bool:
        return self._is_zero

    @property
    def weak_convexity(self) -> float:
        return self._weak_convexity

    @property
    def lipschitz_hess_bound(self):
        return self._lipschitz_hess_bound

    @property
    def closed_form_prox(self):
        return self._closed_form_prox

    @property
    def has_gradient(self) -> bool:
        return self._gradient is not None

    def value(self, x) -> ExtendedReal:
        return extended(self._value(x))

    def gradient(self, x):
        """
        Gradient at x, or None where fn is not differentiable.
        """
        if self._gradient is None:
            return None
        g = self._gradient(x)
        return None if g is None else np.asarray(g, dtype=float)

    def hessian_at(self, x):
        """
        Local Hessian at x, or None when fn is not twice differentiable there.
        """
        if self._hessian_at is not None:
            hess = self._hessian_at(x)
            return None if hess is None else as_mat(hess, self._name + " hessian")
        if self._gradient is not None and self.gradient(x) is not None:
            return symmetrize(fd_jacobian(self.gradient, x))
        return None

    def __repr__(self):
        return "ProxableFn(%s, beta=%g)" % (self._name, self._weak_convexity)


class LinearMap:
    """
    A linear map L: R^n -> R^m with its operator norm.
    """

    def __init__(self, matrix):
        self._matrix = as_mat(matrix, "linear map")
        self._matrix.setflags(write=False)
        self._op_norm = operator_norm(self._matrix)

    @classmethod
    def identity(cls, n: int) -> "LinearMap":
        return cls(np.eye(n))

    @property
    def matrix(self) -> np.ndarray:
        return self._matrix

    @property
    def op_norm(self) -> float:
        return self._op_norm

    @property
    def shape(self):
        return self._matrix.shape

    def apply(self, x) -> np.ndarray:
        return self._matrix @ x

    def adjoint(self, y) -> np.ndarray:
        return self._matrix.T @ y

    def __repr__(self):
        return "LinearMap(%dx%d, |L|=%g)" % (self.shape[0], self.shape[1], self._op_norm)


def zero_smooth(dim: int) -> SmoothFn:
    return SmoothFn(value=lambda x: 0.0, gradient=lambda x: np.zeros(dim), lipschitz_grad=0.0,
                    hessian=lambda x: np.zeros((dim, dim)), closed_form_prox=lambda gamma, z: np.array(z, dtype=float),
                    name="zero", is_zero=True)


def zero_proxable(dim: int) -> ProxableFn:
    return ProxableFn(value=lambda x: 0.0, weak_convexity=0.0, gradient=lambda x: np.zeros(dim),
                      closed_form_prox=lambda gamma, z: np.array(z, dtype=float),
                      hessian_at=lambda x: np.zeros((dim, dim)), lipschitz_hess_bound=0.0, name="zero", is_zero=True)


class ProblemTriple:
    """
    The objective phi(x) = f(x) + g(x) + h(Lx) with its smoothness constants.
    """

    def __init__(self, f: ProxableFn, g: SmoothFn, h: SmoothFn, linear_map: LinearMap, name: str = "custom",
                 params: dict = None, landmarks=None):
        assert isinstance(f, ProxableFn)
        assert isinstance(g, SmoothFn)
        assert isinstance(h, SmoothFn)
        assert isinstance(linear_map, LinearMap)
        self._f = f
        self._g = g
        self._h = h
        self._L = linear_map
        self._name = name
        self._params = dict(params or {})
        self._landmarks = landmarks  # Known critical points, registry problems only
        self._check_dimensions()

    def _check_dimensions(self):
        m, n = self._L.shape
        probe_x = np.zeros(n)
        probe_y = np.zeros(m)
        if np.asarray(self._g.gradient(probe_x)).shape != (n,):
            raise BadParams(self._name, "g must act on R^%d" % n)
        if np.asarray(self._h.gradient(probe_y)).shape != (m,):
            raise BadParams(self._name, "h must act on R^%d (range of L)" % m)
        if self._f.has_gradient:
            grad_f = self._f.gradient(probe_x)
            if grad_f is not None and np.asarray(grad_f).shape != (n,):
                raise BadParams(self._name, "f must act on R^%d" % n)

    @property
    def f(self) -> ProxableFn:
        return self._f

    @property
    def g(self) -> SmoothFn:
        return self._g

    @property
    def h(self) -> SmoothFn:
        return self._h

    @property
    def L(self) -> LinearMap:
        return self._L

    @property
    def name(self) -> str:
        return self._name

    @property
    def params(self) -> dict:
        return dict(self._params)

    @property
    def landmarks(self):
        return self._landmarks

    @property
    def dimension(self) -> int:
        return self._L.shape[1]

    @property
    def range_dimension(self) -> int:
        return self._L.shape[0]

    @property
    def L_g(self) -> float:
        return self._g.lipschitz_grad

    @property
    def L_h(self) -> float:
        return self._h.lipschitz_grad

    @property
    def beta_f(self) -> float:
        return self._f.weak_convexity

    @property
    def L_f(self):
        return self._f.lipschitz_hess_bound

    @property
    def L_norm(self) -> float:
        return self._L.op_norm

    @property
    def smooth_constant(self) -> float:
        """
        L_g + L_h |L|^2.
        """
        return self.L_g + self.L_h * self.L_norm ** 2

    def constants(self) -> dict:
        return {"L_g": self.L_g, "L_h": self.L_h, "beta_f": self.beta_f, "L_f": self.L_f, "L_norm": self.L_norm}

    def __repr__(self):
        return "ProblemTriple(%s, n=%d, m=%d)" % (self._name, self.dimension, self.range_dimension)


def phi_value(problem: ProblemTriple, x) -> ExtendedReal:
    """
    Objective value f(x) + g(x) + h(Lx) in the extended reals.
    """
    x = as_vec(x, "phi_value point")
    return problem.f.value(x) + problem.g.value(x) + problem.h.value(problem.L.apply(x))


def phi_gradient(problem: ProblemTriple, x) -> np.ndarray:
    """
    Gradient of the objective where f is differentiable.
    """
    x = as_vec(x, "phi_gradient point")
    grad_f = problem.f.gradient(x)
    if grad_f is None:
        raise HessianUnavailable(problem.f.name + " (gradient)", x.tolist())
    return grad_f + problem.g.gradient(x) + problem.L.adjoint(problem.h.gradient(problem.L.apply(x)))


def phi_hessian(problem: ProblemTriple, x) -> np.ndarray:
    """
    Hessian of the objective, assembled as hess f + hess g + L^T hess h L.
    """
    x = as_vec(x, "phi_hessian point")
    hess_f = problem.f.hessian_at(x)
    if hess_f is None:
        raise HessianUnavailable(problem.f.name, x.tolist())
    lm = problem.L.matrix
    return hess_f + problem.g.hessian(x) + lm.T @ problem.h.hessian(problem.L.apply(x)) @ lm
