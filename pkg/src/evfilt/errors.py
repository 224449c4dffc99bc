"""Exception hierarchy.

Input-data problems (bad files, bad records) are distinct from
configuration problems and from internal invariant breaches so the CLI
can map them to stable exit codes.
"""

from __future__ import annotations


class EvfiltError(Exception):
    """Base class for all errors raised by this package."""


class FormatError(EvfiltError):
    """Malformed file: bad magic, truncated payload, unparsable record."""


class CoordinateError(EvfiltError):
    """Event coordinate or polarity outside the stream geometry."""

    def __init__(self, index: int, message: str):
        super().__init__(f"record {index}: {message}")
        self.index = index


class TimestampOrderError(EvfiltError):
    """Event timestamps decrease within a stream."""

    def __init__(self, index: int, message: str):
        super().__init__(f"record {index}: {message}")
        self.index = index


class GeometryMismatchError(EvfiltError):
    """Two streams with incompatible sensor geometry were combined."""


class LabelError(EvfiltError):
    """Polarity labels violate an operation's precondition."""

    def __init__(self, index: int, message: str):
        super().__init__(f"record {index}: {message}")
        self.index = index


class ConfigError(EvfiltError):
    """Invalid configuration value or flag combination."""


class DomainError(EvfiltError):
    """Inputs outside an operation's mathematical domain."""


class InternalError(EvfiltError):
    """An internal invariant was breached; indicates a bug."""
