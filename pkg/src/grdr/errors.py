"""Exception hierarchy shared by the grdr modules."""


class GrdrError(Exception):
    """Base class for all errors raised by grdr."""


class NotPSDError(GrdrError, ValueError):
    """A covariance or factorization pivot is negative beyond tolerance."""

    def __init__(self, message, index=None, value=None):
        super().__init__(message)
        self.index = index
        self.value = value


class ScheduleError(GrdrError, ValueError):
    """A q-vector violates 1 = q0 >= q1 >= ... >= q_{d-1} > 0."""


class DimensionError(GrdrError, ValueError):
    """Inputs of mismatched dimension were combined."""


class ConfigError(GrdrError, ValueError):
    """Invalid experiment configuration; `field` names the offending key."""

    def __init__(self, message, field=None):
        super().__init__(f"{field}: {message}" if field else message)
        self.field = field
