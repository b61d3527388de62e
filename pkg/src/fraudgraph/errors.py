"""Exception types shared across the package."""


class FraudGraphError(Exception):
    """Base class for package errors."""


class SchemaError(FraudGraphError):
    """A required CSV column is missing or the schema mapping is invalid."""


class RowError(FraudGraphError):
    """A CSV data row could not be parsed; carries the 1-based line number."""

    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


class DuplicateIdError(FraudGraphError):
    """A transaction id appeared more than once in one dataset."""


class ConfigError(FraudGraphError):
    """An invalid configuration value; names the offending field."""


class DimensionError(FraudGraphError):
    """Array shapes do not agree."""


class NumericError(FraudGraphError):
    """A non-finite value appeared where finite math was required."""


class MetricError(FraudGraphError):
    """A metric is undefined for the given inputs (e.g. single-class AUC)."""
