"""Shared exception root so callers can catch toolkit errors in one clause."""


class Nl2ApiError(Exception):
    """Base class for every error raised by this package."""
