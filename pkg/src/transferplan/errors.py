"""Exception hierarchy shared by every module.

The CLI maps :class:`ValidationError` to exit code 2 and
:class:`ComputationError` to exit code 3.
"""


class TransferPlanError(Exception):
    """Base class for all package errors."""


class ValidationError(TransferPlanError, ValueError):
    """Malformed input: bad file contents, out-of-range arguments."""


class ComputationError(TransferPlanError, ArithmeticError):
    """A well-formed input on which a computation is undefined."""


class IncomparablePairError(ComputationError):
    """Two feature vectors share no co-observed dimension."""

    def __init__(self, message, pair=None):
        super().__init__(message)
        self.pair = pair
