"""Exception hierarchy shared by every module of the package."""

from __future__ import annotations


class ShanksError(Exception):
    """Base class for all errors raised by this package."""


class SingularSystem(ShanksError):
    """A coefficient system is numerically singular; regularize or shrink the window."""


class DegenerateNormalization(ShanksError):
    """The sum-to-one normalization cannot be achieved numerically."""


class OutOfWindow(ShanksError, IndexError):
    """A requested iterate was evicted from (or never entered) a window."""


class AllCandidatesFailed(ShanksError):
    """Every candidate of a grid search produced a non-finite residual."""


class DegenerateTrace(ShanksError):
    """trace(I - A(lambda)) vanishes, so the GCV functional is undefined."""


class SingularProblem(ShanksError):
    """I - M is (numerically) singular for a linear fixed-point problem."""


class NotStochastic(ShanksError):
    """A matrix offered as column stochastic is not."""


class ParseError(ShanksError):
    """Malformed Matrix Market input."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class EmptyMatrix(ShanksError):
    """A Matrix Market file declared no rows, columns or entries."""


class LinearSolveFailed(ShanksError):
    """An inner sparse linear solve failed or returned non-finite values."""


class ConfigError(ShanksError):
    """Invalid experiment or method configuration.

    ``path`` is the dotted location of the offending field, e.g. ``methods.2.tau``.
    """

    def __init__(self, message: str, path: str = ""):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


class IoError(ShanksError, OSError):
    """Writing or reading run records failed."""


class RunFailed(ShanksError):
    """A driver stopped without converging; ``record`` holds the partial run."""

    def __init__(self, message: str, record):
        self.record = record
        super().__init__(message)


class Diverged(RunFailed):
    """The fixed-point residual blew past the divergence guard."""


class BudgetExhausted(RunFailed):
    """The G-evaluation budget ran out before convergence."""
