"""Exception types shared across the counselqa pipeline.

File-system problems (missing files, unreadable paths) surface as the
built-in ``OSError`` family; everything defined here signals a violation
of a pipeline contract rather than an OS failure.
"""

from __future__ import annotations


class PipelineError(Exception):
    """Base class for all counselqa errors."""


class EncodingError(PipelineError):
    """Input bytes are not valid UTF-8. Reports the first bad byte offset."""

    def __init__(self, path: str, byte_offset: int, reason: str = "invalid UTF-8"):
        super().__init__(f"{path}: {reason} at byte offset {byte_offset}")
        self.path = path
        self.byte_offset = byte_offset


class FormatError(PipelineError):
    """Structured text does not match the expected shape."""


class ConfigError(PipelineError):
    """A configuration value is missing, malformed, or inconsistent."""


class EmptyCorpusError(PipelineError):
    """An operation that needs training text received none."""


class EmptyInputError(PipelineError):
    """An evaluation was asked to run over zero items or zero tokens."""


class CapabilityError(PipelineError):
    """The selected backend does not support the requested operation."""


class RemoteError(PipelineError):
    """A remote model call failed (transport, status, or malformed body)."""

    def __init__(self, message: str, status: int | None = None):
        super().__init__(message)
        self.status = status


class RangeError(PipelineError):
    """A rating score fell outside the 1-5 scale."""


class UnknownItemError(PipelineError):
    """A rating referenced an item that does not exist."""


class EmptyStoreError(PipelineError):
    """Aggregation was requested over a store with no usable ratings."""


class InputError(PipelineError):
    """Session construction inputs are incomplete or inconsistent."""
