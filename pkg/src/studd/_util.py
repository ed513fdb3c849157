"""Small shared helpers: error types and deterministic seed mixing."""

_MASK = (1 << 64) - 1


class StuddError(Exception):
    """Base class for all package errors."""


class ValidationError(StuddError, ValueError):
    """Invalid input, configuration or schema."""


class ParseError(ValidationError):
    """A data file could not be parsed."""

    def __init__(self, message, row=None):
        super().__init__(message if row is None else f"row {row}: {message}")
        self.row = row


class SchemaError(ValidationError):
    pass


def _splitmix64(z):
    z = (z + 0x9E3779B97F4A7C15) & _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def mix(seed: int, key: int) -> int:
    """Derive a 64-bit sub-seed from ``seed`` and an integer ``key``.

    Two splitmix64 rounds; the result depends only on the integer values, so
    sub-seeds are identical across platforms and Python versions.
    """
    return _splitmix64(_splitmix64(seed & _MASK) ^ (key & _MASK))


def name_key(name: str) -> int:
    """Stable integer key for a short ASCII stream name (e.g. ``"student"``)."""
    return int.from_bytes(name.encode("ascii")[:8], "big")
