"""Exception hierarchy shared by the solver modules."""


class FracWestError(Exception):
    """Base class for all errors raised by :mod:`fracwest`."""


class DomainError(FracWestError, ValueError):
    """An argument lies outside the domain of the function being evaluated."""


class ConvergenceError(FracWestError, ArithmeticError):
    """An iterative evaluation did not reach its accuracy target."""


class ContourAccuracyError(ConvergenceError):
    """The contour-integral CQ weights have a non-negligible imaginary part."""


class NotSPDError(FracWestError, ArithmeticError):
    """A linear system expected to be symmetric positive definite is not.

    Attributes
    ----------
    residual : float
        Relative residual at the point of failure (``nan`` for direct solvers).
    """

    def __init__(self, message, residual=float("nan")):
        super().__init__(message)
        self.residual = residual


class BreakdownError(FracWestError, RuntimeError):
    """The time stepper cannot continue (shock formation or Newton failure)."""

    def __init__(self, message, step=None, time=None):
        super().__init__(message)
        self.step = step
        self.time = time


class DegeneracyError(BreakdownError):
    """The leading coefficient ``1 - 2k u`` has (nearly) lost positivity."""


class NewtonDivergenceError(BreakdownError):
    """Newton's method failed to converge within its iteration budget.

    Attributes
    ----------
    trace : list of float
        Residual norms of every Newton iterate.
    """

    def __init__(self, message, step=None, time=None, trace=()):
        super().__init__(message, step=step, time=time)
        self.trace = list(trace)


class ConfigError(FracWestError, ValueError):
    """Malformed configuration document or out-of-range parameter."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
