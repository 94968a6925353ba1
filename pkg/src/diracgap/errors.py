"""Exception types shared across the toolkit."""


class DiracGapError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(DiracGapError):
    """A run configuration is malformed or inconsistent."""


class PreconditionError(DiracGapError):
    """A documented precondition of an operation does not hold."""
