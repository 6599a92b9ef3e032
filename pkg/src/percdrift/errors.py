"""Exception types shared across the package."""


class PercdriftError(Exception):
    pass


class UnsupportedDimensionError(PercdriftError):
    pass


class NotATrapError(PercdriftError):
    pass


class DisconnectedError(PercdriftError):
    pass


class InsufficientDataError(PercdriftError):
    pass


class DegenerateSampleError(PercdriftError):
    pass


class ConvergenceError(PercdriftError):
    pass


class ConfigError(PercdriftError):
    pass
