"""Exception hierarchy.

Every error raised deliberately by the package derives from :class:`LfhcError`
so callers (and the fuzz harness) can tell a structured failure from a crash.
"""


class LfhcError(Exception):
    """Base class for all package errors."""


class LightFieldError(LfhcError, ValueError):
    pass


class MissingView(LightFieldError):
    def __init__(self, row, col, path=None):
        self.row = row
        self.col = col
        self.path = path
        super().__init__(f"missing view ({row}, {col}): {path}")


class DimensionMismatch(LightFieldError):
    def __init__(self, message, path=None):
        self.path = path
        super().__init__(message if path is None else f"{message}: {path}")


class UnreadableImage(LightFieldError):
    def __init__(self, path, reason=""):
        self.path = path
        super().__init__(f"cannot read image {path}: {reason}")


class ScanOrderError(LfhcError, ValueError):
    pass


class ConfigError(LfhcError, ValueError):
    pass


class InputError(LfhcError, ValueError):
    """Invalid array input (empty, wrong shape, non-finite, out of range)."""


class EmptyInput(InputError):
    pass


class CodecError(LfhcError):
    pass


class ExternalCodecError(CodecError):
    pass


class DecodeError(CodecError):
    """Corrupt or truncated coded data; ``offset`` is a byte position."""

    def __init__(self, message, offset=None):
        self.offset = offset
        if offset is not None:
            message = f"{message} (at byte {offset})"
        super().__init__(message)


class BitstreamError(DecodeError):
    pass


class PayloadCountMismatch(BitstreamError):
    def __init__(self, expected, found):
        self.expected = expected
        self.found = found
        super().__init__(f"expected {expected} payloads, found {found}")
