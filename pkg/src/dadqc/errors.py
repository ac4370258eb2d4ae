"""Exception types raised across the package."""


class NoFactorError(ValueError):
    """The host graph has no d-factor for the requested degree."""


class RetryExhaustedError(RuntimeError):
    """A rejection sampler hit its retry cap."""


class ConvergenceError(RuntimeError):
    """An iterative numerical routine failed to converge.

    ``last`` carries the final iterate so callers can inspect it.
    """

    def __init__(self, message, last=None):
        super().__init__(message)
        self.last = last


class FormatError(ValueError):
    """A text input file is malformed; ``line`` is 1-based when known."""

    def __init__(self, message, line=None, source=None):
        where = ""
        if source is not None:
            where += f"{source}:"
        if line is not None:
            where += f"{line}:"
        super().__init__(f"{where} {message}" if where else message)
        self.line = line
        self.source = source
