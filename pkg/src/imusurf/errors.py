"""Exception hierarchy shared by all modules."""


class ImuSurfError(Exception):
    """Base class for every error raised by this package."""


class ShapeError(ImuSurfError, ValueError):
    pass


class NumericError(ImuSurfError, ArithmeticError):
    pass


class DataError(ImuSurfError, ValueError):
    pass


class SchemaError(DataError):
    """A required column is missing from an input file."""

    def __init__(self, column, path=None):
        self.column = column
        self.path = path
        where = f" in {path}" if path else ""
        super().__init__(f"missing column {column!r}{where}")


class ParseError(DataError):
    """A cell could not be parsed. ``row`` is 1-based and counts data rows."""

    def __init__(self, row, column, value, path=None):
        self.row = row
        self.column = column
        self.value = value
        where = f"{path}: " if path else ""
        super().__init__(f"{where}row {row}, column {column!r}: cannot parse {value!r}")


class FormatError(ImuSurfError, ValueError):
    """A serialized file is corrupt, truncated or inconsistent."""

    def __init__(self, message, field=None):
        self.field = field
        if field is not None:
            message = f"{field}: {message}"
        super().__init__(message)


class ConfigError(ImuSurfError, ValueError):
    pass


class TrainingError(ImuSurfError, RuntimeError):
    def __init__(self, message, epoch=None, batch=None):
        self.epoch = epoch
        self.batch = batch
        super().__init__(f"{message} (epoch {epoch}, batch {batch})")
