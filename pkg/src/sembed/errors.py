"""Exception hierarchy shared across the package."""

from __future__ import annotations


class SembedError(Exception):
    """Base class for every error raised by this package."""


class InputError(SembedError, ValueError):
    """A caller supplied data that violates an operation's preconditions."""


class DimensionError(InputError):
    """Tensor shapes do not line up."""


class NumericDomainError(SembedError, ArithmeticError):
    """A value falls outside the domain of a numeric operation (e.g. zero-norm vector)."""


class UndefinedCorrelationError(NumericDomainError):
    """Correlation requested for a sequence with zero rank variance."""


class TapeError(SembedError, RuntimeError):
    """Misuse of the differentiation tape (reuse, mixing tapes, non-scalar loss)."""


class ConfigError(InputError):
    """Invalid or unknown configuration value."""


class ParseError(InputError):
    """A file could not be parsed. ``line`` is 1-based when known."""

    def __init__(self, message: str, path: str | None = None, line: int | None = None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}"
        if line is not None:
            where = f"{where}:{line}" if where else f"line {line}"
        super().__init__(f"{where}: {message}" if where else message)


class CheckpointError(SembedError):
    """Base class for checkpoint decoding failures."""


class BadMagicError(CheckpointError):
    pass


class VersionMismatchError(CheckpointError):
    pass


class TruncatedCheckpointError(CheckpointError):
    pass


class TrainingError(SembedError, RuntimeError):
    """Optimization produced a non-finite value."""
