EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_INVARIANT = 4


class DyeError(Exception):
    """
    Base class of toolkit errors. Subclasses carry a stable exit code used by the command line.
    """
    exit_code = EXIT_NUMERICAL


# Configuration and parameter errors

class ConfigError(DyeError):
    exit_code = EXIT_CONFIG


class ParseError(ConfigError):
    def __init__(self, line, message):
        self.line = line
        self.message = message

    def __str__(self):
        return "Config parse error at line %d: %s" % (self.line, self.message)


class SchemaError(ConfigError):
    def __init__(self, key, message="invalid value"):
        self.key = key
        self.message = message

    def __str__(self):
        return "Config schema error at '%s': %s" % (self.key, self.message)


class UnknownProblem(ConfigError):
    def __init__(self, name, known):
        self.name = name
        self.known = known

    def __str__(self):
        return "Unknown problem '%s'. Known problems: %s" % (self.name, ", ".join(self.known))


class BadParams(ConfigError):
    def __init__(self, problem, message, key=None):
        self.problem = problem
        self.message = message
        self.key = key

    def __str__(self):
        return "Bad parameters for problem '%s': %s" % (self.problem, self.message)


class BadConfig(ConfigError):
    def __init__(self, message):
        self.message = message

    def __str__(self):
        return "Bad experiment config: %s" % self.message


class GammaOutOfRange(ConfigError):
    def __init__(self, bound_name, gamma, bound):
        self.bound_name = bound_name
        self.gamma = gamma
        self.bound = bound

    def __str__(self):
        return "gamma=%r violates %s (bound %r)" % (self.gamma, self.bound_name, self.bound)


class AlphaNonPositive(ConfigError):
    def __init__(self, alpha):
        self.alpha = alpha

    def __str__(self):
        return "alpha must be positive, got %r" % self.alpha


class ModeMismatch(ConfigError):
    def __init__(self, mode, expected):
        self.mode = mode
        self.expected = expected

    def __str__(self):
        return "Mode %s is not applicable here (expected %s)" % (self.mode, self.expected)


# Numerical failures

class NumericalError(DyeError):
    exit_code = EXIT_NUMERICAL


class SingularMatrix(NumericalError):
    def __init__(self, pivot, scale):
        self.pivot = pivot
        self.scale = scale

    def __str__(self):
        return "Matrix is singular to working precision (pivot %.3e, |M|_inf %.3e)" % (self.pivot, self.scale)


class NotSymmetric(NumericalError):
    def __init__(self, deviation, tolerance):
        self.deviation = deviation
        self.tolerance = tolerance

    def __str__(self):
        return "Matrix is not symmetric: |M - M^T|_inf = %.3e > %.3e" % (self.deviation, self.tolerance)


class NonFiniteValue(NumericalError):
    def __init__(self, where):
        self.where = where

    def __str__(self):
        return "Non-finite value encountered in %s" % self.where


class SubproblemNotConverged(NumericalError):
    def __init__(self, iter_count, grad_norm):
        self.iter_count = iter_count
        self.grad_norm = grad_norm

    def __str__(self):
        return "Proximal subproblem did not converge after %d Newton iterations (gradient norm %.3e)" % (
            self.iter_count, self.grad_norm)


class MetricSingular(NumericalError):
    def __init__(self, condition):
        self.condition = condition

    def __str__(self):
        return "Variable metric A(z) is numerically singular (condition estimate %.3e). " \
               "Check the declared smoothness constants." % self.condition


class NotConverged(NumericalError):
    def __init__(self, iter_count, residual):
        self.iter_count = iter_count
        self.residual = residual

    def __str__(self):
        return "Iteration did not converge within %d iterations (residual %.3e)" % (self.iter_count, self.residual)


class NotCritical(NumericalError):
    def __init__(self, grad_norm, tolerance):
        self.grad_norm = grad_norm
        self.tolerance = tolerance

    def __str__(self):
        return "Point is not critical: |grad env| = %.3e > %.3e" % (self.grad_norm, self.tolerance)


class NotFixedPoint(NumericalError):
    def __init__(self, residual, tolerance):
        self.residual = residual
        self.tolerance = tolerance

    def __str__(self):
        return "Point is not a fixed point of T: |w| = %.3e > %.3e" % (self.residual, self.tolerance)


class HessianUnavailable(NumericalError):
    def __init__(self, fn_name, where):
        self.fn_name = fn_name
        self.where = where

    def __str__(self):
        return "Second derivatives of %s are unavailable at %s" % (self.fn_name, self.where)


class LocalSmoothnessViolated(NumericalError):
    def __init__(self, message):
        self.message = message

    def __str__(self):
        return "Local smoothness of f does not hold: %s" % self.message


# Invariant violations

class InvariantViolation(DyeError):
    exit_code = EXIT_INVARIANT


class CorrespondenceViolated(InvariantViolation):
    def __init__(self, message):
        self.message = message

    def __str__(self):
        return "Envelope/objective correspondence violated: %s" % self.message
