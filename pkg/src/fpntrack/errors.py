class FpnTrackError(Exception):
    """Base class for all library errors."""


class InvalidInputError(FpnTrackError):
    """An argument violates a documented precondition."""


class SolverError(FpnTrackError):
    """The ridge system is singular or too ill-conditioned to trust."""


class UndefinedMetricError(FpnTrackError):
    """A metric is undefined for the given data (e.g. no present frames)."""


class ContainerError(FpnTrackError):
    """A serialized container or manifest is malformed."""


class UsageError(FpnTrackError):
    """Bad command-line invocation."""
