"""Exception hierarchy for qcompare."""


class QCompareError(ValueError):
    """Base class for all library errors."""


class InvalidDimensionError(QCompareError):
    pass


class DimensionMismatchError(QCompareError):
    pass


class NotAStateError(QCompareError):
    """Raised when a matrix fails a density-operator invariant.

    ``min_eigenvalue`` carries the offending smallest eigenvalue when the
    failure is a positivity violation, otherwise ``None``.
    """

    def __init__(self, message, min_eigenvalue=None):
        super().__init__(message)
        self.min_eigenvalue = min_eigenvalue


class InvalidEffectError(QCompareError):
    def __init__(self, message, magnitude=None):
        super().__init__(message)
        self.magnitude = magnitude


class InvalidPovmError(QCompareError):
    def __init__(self, message, magnitude=None):
        super().__init__(message)
        self.magnitude = magnitude


class ConvergenceError(QCompareError):
    """The optimizer exhausted its budget; ``best`` holds the best bound."""

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class BudgetExceededError(QCompareError):
    pass


class OutOfDomainError(QCompareError):
    pass
