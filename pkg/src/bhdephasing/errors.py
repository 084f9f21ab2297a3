"""Exception hierarchy shared by all modules."""


class DephasingError(Exception):
    """Base class for every error raised by :mod:`bhdephasing`."""


class NoConvergence(DephasingError):
    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class UnderTruncated(DephasingError):
    def __init__(self, message, top_weight=None):
        super().__init__(message)
        self.top_weight = top_weight


class OutOfLobe(DephasingError):
    pass


class NoBracket(DephasingError):
    pass


class DynamicallyUnstable(DephasingError):
    def __init__(self, message, k=None):
        super().__init__(message)
        self.k = k


class ModeUnavailable(DephasingError):
    pass


class InvalidState(DephasingError):
    pass


class DegenerateEcho(DephasingError):
    pass


class Unsupported(DephasingError):
    pass


class NonPositive(DephasingError):
    pass


class MissingSeries(DephasingError):
    pass


class ConfigError(DephasingError):
    pass
