"""Exception types raised across the package."""


class PermanentError(Exception):
    """Base class for all package errors."""


class NegativeEntryError(PermanentError, ValueError):
    pass


class MatrixParseError(PermanentError, ValueError):
    pass


class NotSquareError(PermanentError, ValueError):
    pass


class MatrixTooLargeError(PermanentError, ValueError):
    pass


class MemoryBudgetError(PermanentError, MemoryError):
    """The depth-d table would not fit in the configured memory budget."""

    def __init__(self, required_bytes: int, budget_bytes: int):
        self.required_bytes = required_bytes
        self.budget_bytes = budget_bytes
        super().__init__(
            f"depth table needs {required_bytes} bytes, budget is {budget_bytes} bytes"
        )


class NumericOverflowError(PermanentError, ArithmeticError):
    pass


class ZeroPermanentError(PermanentError):
    """Raised where sampling is impossible because no permutation has positive weight."""


class NestingFailure(PermanentError):
    """The column-wise child bounds could not be made to nest."""


class TrialBudgetExceeded(PermanentError):
    """Sampling stopped before reaching the accept target.

    ``accepted``, ``trials`` and ``elapsed`` record the partial state.
    """

    def __init__(self, message: str, accepted: int, trials: int, elapsed: float):
        self.accepted = accepted
        self.trials = trials
        self.elapsed = elapsed
        super().__init__(message)
