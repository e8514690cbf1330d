"""Exception hierarchy shared by all modules.

Each class maps onto one CLI exit code (see :mod:`choquard_lab.cli`).
"""


class ChoquardLabError(Exception):
    """Base class for errors raised by this package."""


class ValidationError(ChoquardLabError, ValueError):
    """A precondition on the inputs is violated."""


class DegenerateInputError(ValidationError):
    """Input field is zero, or every nonlinear term vanishes on it."""


class NumericalAccuracyError(ChoquardLabError, ArithmeticError):
    """Two independent numerical routes disagree beyond tolerance."""


class ConvergenceError(ChoquardLabError, RuntimeError):
    """An iterative procedure ran out of iterations."""
