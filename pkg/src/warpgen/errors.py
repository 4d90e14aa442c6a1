"""Shared exception types."""


class ShapeError(ValueError):
    """Operands have incompatible or invalid dimensions."""


class FormatError(ValueError):
    """A binary container is malformed (bad magic, truncation, overflow)."""
