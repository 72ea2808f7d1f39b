"""Exception hierarchy shared by every fiergm module."""


class FiergmError(Exception):
    """Base class for library errors."""


class InvalidInputError(FiergmError, ValueError):
    """Data or arguments that violate an operation's preconditions."""


class CapacityError(FiergmError, ValueError):
    """Request exceeds what an exact (enumeration) routine will attempt."""


class ConfigError(FiergmError, ValueError):
    """Inconsistent or out-of-range configuration."""


class InvalidStateError(FiergmError, ValueError):
    """Sampler state outside its domain (e.g. non-positive variance)."""


class ParseError(InvalidInputError):
    """Malformed input file. ``line`` is 1-based when known."""

    def __init__(self, message, line=None, path=None):
        self.line = line
        self.path = path
        parts = [str(path)] if path is not None else []
        if line is not None:
            parts.append(f"line {line}")
        where = ", ".join(parts)
        super().__init__(f"{where}: {message}" if where else message)


class IntegrityError(FiergmError):
    """Persisted artifact is truncated or corrupted."""


class VersionError(IntegrityError):
    """Persisted artifact was written by an incompatible format version."""
