"""Exception types raised across the package."""


class SlowrecError(Exception):
    """Base class for all package errors."""


class DomainError(SlowrecError, ValueError):
    """Argument outside the domain of a transform."""


class IntegrabilityError(SlowrecError, ValueError):
    """The drift vanishes (or turns negative) on an integration path."""


class ConfigError(SlowrecError, ValueError):
    """Invalid run configuration or model parameters."""


class OrderingError(SlowrecError, ValueError):
    """Exponents violate ``0 < alpha < 1 - theta < beta``."""


class WindowError(SlowrecError, ValueError):
    """Exponent outside the ``(lambda, 1 - theta)`` window."""


class InsufficientPointsError(SlowrecError, ValueError):
    """Too few usable survival points for a tail fit."""


class CapError(SlowrecError, RuntimeError):
    """Truncated kernel cap too small for the requested accuracy."""


class NonConvergenceError(SlowrecError, RuntimeError):
    """An iterative computation did not reach its tolerance."""


class SchemaError(SlowrecError, ValueError):
    """Input file does not follow the declared schema."""
