"""Exception types. The CLI maps each family to an exit code."""


class BotlensError(Exception):
    """Base class for all package errors."""


class DataError(BotlensError, ValueError):
    """Invalid input data, schema mismatch or violated precondition.

    ``code`` is a stable machine-readable tag (``schema_mismatch``,
    ``non_numeric``, ``duplicate_id`` ...) used by tests and CLI diagnostics.
    """

    def __init__(self, message: str, code: str = "invalid"):
        super().__init__(message)
        self.code = code


class NumericalError(BotlensError, ArithmeticError):
    """Non-finite values or singular systems during training or explanation."""
