class MineGameError(Exception):
    """Base class for errors raised by this package."""


class InvalidStateError(MineGameError, ValueError):
    pass


class IllegalActionError(MineGameError, ValueError):
    pass


class ConvergenceError(MineGameError, RuntimeError):
    """Value iteration hit ``max_iters`` before the residual fell below ``tol``."""

    def __init__(self, message, residual=None, iterations=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class NotRecurrentError(MineGameError, RuntimeError):
    """State (0, 0) is not recurrent under the evaluated policy."""


class InconsistencyError(MineGameError, RuntimeError):
    """An identity that must hold for a converged solution was violated."""


class NonMonotoneError(MineGameError, RuntimeError):
    def __init__(self, message, offending=()):
        super().__init__(message)
        self.offending = list(offending)
