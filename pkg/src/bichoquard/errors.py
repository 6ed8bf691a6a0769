"""Exception types shared across the package."""


class BichoquardError(Exception):
    """Base class for all package errors."""


class OverflowGuardError(BichoquardError, ValueError):
    """An exponential nonlinearity was asked to evaluate beyond its safe range.

    ``limit`` is the largest admissible amplitude and ``value`` the offending one.
    """

    def __init__(self, message, *, limit=None, value=None, s_range=None):
        super().__init__(message)
        self.limit = limit
        self.value = value
        self.s_range = s_range


class ZeroFieldError(BichoquardError, ValueError):
    pass


class GridTooLargeError(BichoquardError, ValueError):
    pass


class BoxTooSmallError(BichoquardError, ValueError):
    pass


class FiberError(BichoquardError, RuntimeError):
    """No sign change of the fiber derivative could be bracketed."""


class ConfigError(BichoquardError, ValueError):
    """Bad command-line or config-file input; ``token`` names the culprit."""

    def __init__(self, message, token=None):
        super().__init__(message)
        self.token = token
