"""
Dense linear algebra and finite-difference derivatives shared by every other module.

Vectors are 1-D float numpy arrays and matrices are 2-D float numpy arrays. Public
operations refuse NaN/Inf on the way in and on the way out.
"""
import logging
import warnings

import numpy as np
import scipy.linalg

from dyestk.constants import SOLVE_PIVOT_RTOL, SOLVE_MAX_CONDITION, SOLVE_RESIDUAL_RTOL, SYMMETRY_RTOL, \
    FD_STEP_FACTOR, MACHINE_EPS
from dyestk.exceptions import SingularMatrix, NotSymmetric, NonFiniteValue

log = logging.getLogger(__name__)


def as_vec(x, where: str = "vector") -> np.ndarray:
    """
    Convert input to a finite 1-D float array.
    :param x: Scalar, list or array.
    :param where: Name used in the error message.
    :return: 1-D float array.
    """
    v = np.atleast_1d(np.asarray(x, dtype=float))
    if v.ndim != 1:
        v = v.reshape(-1)
    if not np.all(np.isfinite(v)):
        raise NonFiniteValue(where)
    return v


def as_mat(m, where: str = "matrix") -> np.ndarray:
    """
    Convert input to a finite 2-D float array.
    """
    a = np.asarray(m, dtype=float)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    elif a.ndim == 1:
        a = a.reshape(1, -1)
    if a.ndim != 2:
        raise ValueError("%s must be two dimensional, got shape %s" % (where, a.shape))
    if not np.all(np.isfinite(a)):
        raise NonFiniteValue(where)
    return a


def inf_norm(m: np.ndarray) -> float:
    """
    Maximum absolute row sum.
    """
    if m.size == 0:
        return 0.0
    return float(np.max(np.sum(np.abs(m), axis=1)))


def symmetry_deviation(m: np.ndarray) -> float:
    return inf_norm(m - m.T)


def is_symmetric(m: np.ndarray, rtol: float = SYMMETRY_RTOL) -> bool:
    m = as_mat(m)
    return m.shape[0] == m.shape[1] and symmetry_deviation(m) <= rtol * (1.0 + inf_norm(m))


def symmetrize(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + m.T)


def solve_linear(m, b) -> np.ndarray:
    """
    Solve M y = b by LU factorization with partial pivoting.
    :param m: Square matrix.
    :param b: Right hand side vector (or matrix of right hand side columns).
    :return: Solution with the shape of b.
    """
    m = as_mat(m, "solve_linear matrix")
    b_arr = np.asarray(b, dtype=float)
    if not np.all(np.isfinite(b_arr)):
        raise NonFiniteValue("solve_linear right hand side")
    n = m.shape[0]
    if m.shape[1] != n:
        raise ValueError("solve_linear needs a square matrix, got %s" % (m.shape,))
    if b_arr.shape[0] != n:
        raise ValueError("Right hand side has %d rows, matrix has %d" % (b_arr.shape[0], n))

    scale = inf_norm(m)
    if scale == 0.0:
        raise SingularMatrix(0.0, scale)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(m, check_finite=False)
    pivot = float(np.min(np.abs(np.diag(lu))))
    if pivot < SOLVE_PIVOT_RTOL * scale:
        raise SingularMatrix(pivot, scale)
    condition = np.linalg.cond(m)
    if not np.isfinite(condition) or condition > SOLVE_MAX_CONDITION:
        raise SingularMatrix(pivot, scale)

    y = scipy.linalg.lu_solve((lu, piv), b_arr, check_finite=False)
    # One step of iterative refinement.
    residual = b_arr - m @ y
    y = y + scipy.linalg.lu_solve((lu, piv), residual, check_finite=False)

    residual_norm = np.linalg.norm(m @ y - b_arr)
    if residual_norm > SOLVE_RESIDUAL_RTOL * (1.0 + np.linalg.norm(b_arr)):
        log.warning("solve_linear residual %.3e above target (condition %.3e)", residual_norm, condition)
    if not np.all(np.isfinite(y)):
        raise NonFiniteValue("solve_linear solution")
    return y


def inverse(m) -> np.ndarray:
    """
    Inverse of a square matrix through solve_linear.
    """
    m = as_mat(m)
    return solve_linear(m, np.eye(m.shape[0]))


def condition_estimate(m) -> float:
    return float(np.linalg.cond(as_mat(m)))


def sym_eigen(m):
    """
    Eigendecomposition of a symmetric matrix.
    :param m: Symmetric matrix (within tolerance |M - M^T|_inf <= 1e-10 (1 + |M|_inf)).
    :return: (eigenvalues ascending, eigenvectors as columns)
    """
    m = as_mat(m, "sym_eigen matrix")
    if m.shape[0] != m.shape[1]:
        raise ValueError("sym_eigen needs a square matrix, got %s" % (m.shape,))
    deviation = symmetry_deviation(m)
    tolerance = SYMMETRY_RTOL * (1.0 + inf_norm(m))
    if deviation > tolerance:
        raise NotSymmetric(deviation, tolerance)
    eigenvalues, eigenvectors = scipy.linalg.eigh(symmetrize(m), check_finite=False)
    return eigenvalues, eigenvectors


def lambda_min(m) -> float:
    return float(sym_eigen(m)[0][0])


def operator_norm(m) -> float:
    """
    Largest singular value.
    """
    m = as_mat(m)
    if m.size == 0:
        return 0.0
    return float(scipy.linalg.svdvals(m)[0])


def default_fd_step(z: np.ndarray) -> float:
    return FD_STEP_FACTOR * (1.0 + np.linalg.norm(z))


def _probe(fn, point, where):
    value = fn(point)
    value = np.asarray(value, dtype=float)
    if not np.all(np.isfinite(value)):
        raise NonFiniteValue(where)
    return value


def fd_gradient(fn, z, h: float = None) -> np.ndarray:
    """
    Central-difference gradient estimate.
    :param fn: Scalar field R^n -> R.
    :param z: Evaluation point.
    :param h: Step. Defaults to eps^(1/3) (1 + |z|).
    :return: Gradient estimate.
    """
    z = as_vec(z, "fd_gradient point")
    if h is None:
        h = default_fd_step(z)
    grad = np.zeros_like(z)
    for i in range(z.size):
        e = np.zeros_like(z)
        e[i] = h
        f_plus = float(_probe(fn, z + e, "fd_gradient probe"))
        f_minus = float(_probe(fn, z - e, "fd_gradient probe"))
        grad[i] = (f_plus - f_minus) / (2.0 * h)
    return grad


def fd_jacobian(fmap, z, h: float = None) -> np.ndarray:
    """
    Central-difference Jacobian estimate, one column per coordinate of z.
    :param fmap: Vector field R^n -> R^m.
    :param z: Evaluation point.
    :param h: Step. Defaults to eps^(1/3) (1 + |z|).
    :return: m x n Jacobian estimate.
    """
    z = as_vec(z, "fd_jacobian point")
    if h is None:
        h = default_fd_step(z)
    columns = []
    for i in range(z.size):
        e = np.zeros_like(z)
        e[i] = h
        plus = np.atleast_1d(_probe(fmap, z + e, "fd_jacobian probe"))
        minus = np.atleast_1d(_probe(fmap, z - e, "fd_jacobian probe"))
        columns.append((plus - minus) / (2.0 * h))
    return np.column_stack(columns)


def fd_hessian(fn, z, h: float = None) -> np.ndarray:
    """
    Second-difference Hessian estimate of a scalar field. Default step is eps^(1/4) (1 + |z|).
    """
    z = as_vec(z, "fd_hessian point")
    if h is None:
        h = MACHINE_EPS ** 0.25 * (1.0 + np.linalg.norm(z))
    n = z.size
    f0 = float(_probe(fn, z, "fd_hessian probe"))
    hess = np.zeros((n, n))
    for i in range(n):
        ei = np.zeros(n)
        ei[i] = h
        f_pp = float(_probe(fn, z + ei, "fd_hessian probe"))
        f_mm = float(_probe(fn, z - ei, "fd_hessian probe"))
        hess[i, i] = (f_pp - 2.0 * f0 + f_mm) / h ** 2
        for j in range(i + 1, n):
            ej = np.zeros(n)
            ej[j] = h
            f_a = float(_probe(fn, z + ei + ej, "fd_hessian probe"))
            f_b = float(_probe(fn, z + ei - ej, "fd_hessian probe"))
            f_c = float(_probe(fn, z - ei + ej, "fd_hessian probe"))
            f_d = float(_probe(fn, z - ei - ej, "fd_hessian probe"))
            hess[i, j] = hess[j, i] = (f_a - f_b - f_c + f_d) / (4.0 * h ** 2)
    return hess
