"""Shared exception base for the mythotag package."""


class MythotagError(Exception):
    """Base class for all errors raised by this package."""
