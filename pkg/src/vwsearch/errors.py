"""Exception types shared across the engine."""


class VwsearchError(Exception):
    """Base class for all engine errors."""


class InvalidInputError(VwsearchError, ValueError):
    """Bad argument values (malformed images, out-of-range indices, ...)."""


class InvalidQueryError(VwsearchError, ValueError):
    """A query that violates the query contract (e.g. no positive words)."""


class NotFoundError(VwsearchError, KeyError):
    """A referenced image or resource does not exist."""


class StorageError(VwsearchError, OSError):
    """I/O failure or corrupted on-disk state."""


class ChecksumMismatchError(StorageError):
    """Index was built against a different dictionary than the one supplied."""
