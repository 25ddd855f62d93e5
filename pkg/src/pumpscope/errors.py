"""Exception hierarchy shared across the pipeline."""

from __future__ import annotations


class PumpscopeError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(PumpscopeError):
    """Invalid configuration (patterns, registry, pipeline config)."""


class SchemaError(PumpscopeError):
    """An input file does not match its declared schema."""

    def __init__(self, path, message: str, row: int | None = None, column: str | None = None):
        self.path = str(path)
        self.row = row
        self.column = column
        where = self.path
        if row is not None:
            where += f":{row}"
        if column is not None:
            where += f" [{column}]"
        super().__init__(f"{where}: {message}")
