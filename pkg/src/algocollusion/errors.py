"""Exception hierarchy shared across the package."""


class CollusionError(Exception):
    """Base class for all package errors."""


class ParameterError(CollusionError, ValueError):
    """Invalid model or experiment parameter."""


class DomainError(CollusionError, ValueError):
    """Argument outside the domain of an operation (bad index, non-finite price, ...)."""


class UnsupportedConfigError(CollusionError, NotImplementedError):
    """Configuration the solver or agent deliberately does not handle."""


class NumericalError(CollusionError, ArithmeticError):
    """Iteration failed to converge, bracket lost, or a value became non-finite."""


class ConfigError(CollusionError, ValueError):
    """Experiment configuration is inconsistent or malformed."""

    def __init__(self, message: str, location: str | None = None):
        self.location = location
        super().__init__(f"{location}: {message}" if location else message)


class WarmupError(DomainError):
    """State history shorter than the memory length."""
