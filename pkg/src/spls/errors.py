"""Exception hierarchy shared by every module of the package."""


class SplsError(Exception):
    """Base class for all errors raised by :mod:`spls`."""


class NonConvergence(SplsError):
    def __init__(self, maxit, residual):
        super().__init__(f"no convergence after {maxit} iterations (residual {residual:.3e})")
        self.maxit = maxit
        self.residual = residual


class NonFiniteValue(SplsError):
    pass


class BreakdownError(SplsError):
    pass


class DimensionTooLarge(SplsError):
    pass


class NotPositiveDefinite(SplsError):
    pass


class InvalidRefinement(SplsError):
    pass


class WrongSpaceKind(SplsError):
    pass


class IncompatibleSpaces(SplsError):
    pass


class LevelOutOfRange(SplsError):
    pass


class ZeroDiagonal(SplsError):
    pass


class LevelMismatch(SplsError):
    pass


class DimensionMismatch(SplsError):
    pass


class InnerSolveFailure(SplsError):
    pass


class MaxIterations(SplsError):
    """Raised by the Uzawa solvers; ``partial`` holds the last state reached."""

    def __init__(self, maxit, partial=None):
        super().__init__(f"Uzawa iteration did not reach the tolerance in {maxit} steps")
        self.maxit = maxit
        self.partial = partial


class ZeroCurvature(SplsError):
    """b(h_j, q_j) vanished while q_j did not: the trial space is not inf-sup stable."""


class QuadratureUnavailable(SplsError):
    pass


class ConfigError(SplsError):
    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field
