"""Exception hierarchy shared by every module.

The CLI maps :class:`PreconditionError` to exit code 1 and
:class:`ConvergenceError` to exit code 2.
"""


class PreconditionError(ValueError):
    """Input outside the domain where an operation is defined."""


class DegenerateInputError(PreconditionError):
    """Evaluation point sits on (or too close to) a singular set."""


class ConvergenceError(RuntimeError):
    """A numerical routine failed to reach its accuracy target."""


class PoleError(ConvergenceError):
    """A contour passes too close to a pole of the integrand."""


class TruncationWarning(UserWarning):
    """An observable was read too close to the edge of a finite window."""
