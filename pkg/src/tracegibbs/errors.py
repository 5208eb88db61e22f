"""Exception types raised across the package."""


class TraceGibbsError(Exception):
    """Base class for package errors."""


class InvalidStateError(TraceGibbsError, ValueError):
    """A state does not match the model's site space."""


class ParameterError(TraceGibbsError, ValueError):
    """An estimator or pipeline parameter is outside its valid range."""


class UnsupportedRangeError(ParameterError):
    """A function range with nonpositive lower end was given to the mean estimator."""


class OracleUnavailableError(TraceGibbsError):
    """The state space is too large for brute-force enumeration."""


class EmptyTraceError(TraceGibbsError, ValueError):
    """A trace of length zero was requested."""


class ModelFormatError(TraceGibbsError, ValueError):
    """A model definition file could not be parsed."""
