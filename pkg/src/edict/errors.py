"""Exception types shared across the package."""

from __future__ import annotations


class ConfigError(ValueError):
    """A configuration value failed validation. `key` is the dotted config key."""

    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


class DataFormatError(ValueError):
    """An input file does not match the documented long CSV format."""


class PredictiveDegeneracyError(ArithmeticError):
    """The predictive Student-t has too few degrees of freedom for the requested moment."""
