"""Exception hierarchy shared across the package."""


class ZmError(Exception):
    """Base class for all package errors."""


class AlphabetError(ZmError, ValueError):
    """Symbols or alphabets that do not fit together."""


class SequenceParseError(ZmError, ValueError):
    def __init__(self, message, position):
        super().__init__(f"{message} at position {position}")
        self.position = position


class SupportViolation(ZmError, ValueError):
    """A word has zero probability under the measure that was asked to score it."""

    def __init__(self, position, message="sequence leaves the support of the measure"):
        super().__init__(f"{message} (position {position})")
        self.position = position


class BudgetExceeded(ZmError, ValueError):
    pass


class ModelError(ZmError, ValueError):
    """Invalid model parameters (non-stochastic rows, reducible chains, ...)."""


class ConfigError(ZmError, ValueError):
    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field


class NotFound(ZmError, LookupError):
    """A waiting-time scan exhausted its horizon without a match."""

    def __init__(self, horizon):
        super().__init__(f"no occurrence within horizon {horizon}")
        self.horizon = horizon
