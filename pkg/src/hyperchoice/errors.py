"""Exception types shared across the package."""


class SchemaError(ValueError):
    """Schema is malformed, or data does not conform to it."""


class CsvParseError(ValueError):
    """A CSV cell could not be parsed (strict mode: abort, naming the row)."""


class NumericError(ArithmeticError):
    """Non-finite values appeared where finite numbers are required."""


class ModelFormatError(ValueError):
    """A model file is unreadable: bad version, shapes, or truncation."""
