"""Exception hierarchy shared across the toolkit."""


class TabmarkError(Exception):
    """Base class for all toolkit errors."""


class SchemaError(TabmarkError):
    """Structural mismatch: wrong lengths, unknown/missing columns, bad config."""


class DomainError(TabmarkError):
    """Value outside the mathematical domain of an operation."""


class KeyFormatError(SchemaError):
    """Malformed or unsupported key document."""


class TableFormatError(TabmarkError):
    """Malformed CSV table file."""
