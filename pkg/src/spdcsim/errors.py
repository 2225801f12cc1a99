"""Exception types raised across the toolkit."""


class SpdcError(Exception):
    """Base class for toolkit errors."""


class ConfigurationError(SpdcError, ValueError):
    """Invalid or incomplete model/interaction configuration."""


class RangeError(SpdcError, ValueError):
    """A quantity lies outside the validity domain of a model."""


class DomainError(SpdcError, ValueError):
    """A mathematical precondition is violated (zero denominator, bad label...)."""


class NoRootError(SpdcError):
    """The mismatch does not change sign inside the search bracket."""


class SpanError(SpdcError, ValueError):
    """Measurement settings do not span the two-qubit operator space."""


class CrystalFileError(ConfigurationError):
    """Malformed crystal definition file."""

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}:"
        if line is not None:
            where += f"{line}:"
        super().__init__(f"{where} {message}" if where else message)
