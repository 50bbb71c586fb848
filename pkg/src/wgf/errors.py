"""Exception hierarchy for the package."""


class WGFError(Exception):
    """Base class for all errors raised by :mod:`wgf`."""


class InvalidMeasureError(WGFError, ValueError):
    pass


class NotRegularError(WGFError, ValueError):
    """The target measure has a vanishing or unbounded density."""


class ConvergenceError(WGFError, RuntimeError):
    """Newton iteration did not reach the gradient tolerance.

    The last iterate and its gradient norm are kept for inspection.
    """

    def __init__(self, message, last_iterate=None, grad_norm=None):
        super().__init__(message)
        self.last_iterate = last_iterate
        self.grad_norm = grad_norm


class DomainCollapseError(WGFError, RuntimeError):
    pass


class PdeAbortError(WGFError, RuntimeError):
    pass


class ConfigError(WGFError, ValueError):
    pass
