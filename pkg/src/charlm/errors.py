"""Exception hierarchy shared across the toolkit.

Exit-code mapping (see cli): UsageError -> 1, DataError -> 2,
NumericError -> 3.
"""


class CharlmError(Exception):
    """Base class for all toolkit errors."""


class UsageError(CharlmError):
    """Bad command-line arguments or run configuration."""


class DataError(CharlmError):
    """Malformed or inconsistent input data (OOV, bad JSONL, empty corpus...)."""


class OovError(DataError):
    """A codepoint outside the vocabulary was encountered."""

    def __init__(self, char: str, offset: int):
        self.char = char
        self.offset = offset
        super().__init__(
            f"out-of-vocabulary character {char!r} (U+{ord(char):04X}) at offset {offset}"
        )


class NumericError(CharlmError):
    """Numeric failure: NaN/Inf values, NaN loss, degenerate statistics."""


class CheckpointError(DataError):
    """Base for checkpoint container problems."""


class BadMagicError(CheckpointError):
    pass


class UnsupportedVersionError(CheckpointError):
    pass


class TruncatedCheckpointError(CheckpointError):
    pass


class ShapeMismatchError(CheckpointError):
    pass
