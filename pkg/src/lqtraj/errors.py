"""Exception hierarchy shared by all modules."""

from __future__ import annotations


class LqtrajError(Exception):
    """Base class for every error raised by this package."""


class ArgumentError(LqtrajError, ValueError):
    """An argument is outside the domain of the operation."""


class InvalidDimensionError(ArgumentError):
    pass


class TruncationError(LqtrajError):
    """The requested state does not fit in the truncated Fock space."""


class DegenerateStateError(LqtrajError):
    """A state (or weighted mass) has zero norm where a nonzero one is required."""


class InvalidStateError(LqtrajError):
    pass


class UnsupportedStateError(LqtrajError):
    pass


class NumericalError(LqtrajError):
    """A numerical method failed to converge or became unstable."""


class SingularDisentanglingError(NumericalError):
    pass


class ConfigurationError(LqtrajError):
    pass
