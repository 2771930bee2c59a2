"""Exception hierarchy for the tvmax package."""


class TvmaxError(Exception):
    """Base class for every error raised by this package."""


class InvalidInputError(TvmaxError, ValueError):
    """An input array is malformed: wrong shape, empty, or non-finite."""


class InvalidParameterError(TvmaxError, ValueError):
    """A scalar parameter lies outside its legal range."""


class InvariantViolationError(TvmaxError, RuntimeError):
    """An internal contract was broken; valid inputs cannot trigger this."""


class UnsupportedSizeError(TvmaxError, ValueError):
    """The instance exceeds the configured small-instance limit."""


class OracleUncertifiedError(TvmaxError, RuntimeError):
    """A reference solve failed its own optimality certification."""
