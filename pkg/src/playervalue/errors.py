"""Exception hierarchy.

``DataError`` subclasses describe problems with the input data and map to
CLI exit status 2; ``UsageError`` subclasses describe bad arguments or
configuration and map to exit status 1.
"""


class PlayerValueError(Exception):
    """Base class for every error raised by this package."""


class DataError(PlayerValueError, ValueError):
    pass


class UsageError(PlayerValueError, ValueError):
    pass


# dataset
class MissingColumn(DataError):
    def __init__(self, column, path=None):
        self.column = column
        self.path = path
        where = f" in {path}" if path else ""
        super().__init__(f"required column {column!r} is absent{where}")


class MalformedRow(DataError):
    def __init__(self, row_index, expected, got, path=None):
        self.row_index = row_index
        self.path = path
        where = f"{path}: " if path else ""
        super().__init__(
            f"{where}data row {row_index} has {got} fields, expected {expected}"
        )


class EmptyResult(DataError):
    pass


class DegenerateSplit(DataError):
    pass


class SchemaMismatch(DataError):
    def __init__(self, column, message=None):
        self.column = column
        super().__init__(message or f"input is missing model feature {column!r}")


# transform
class NonPositiveInput(DataError):
    pass


class DegenerateInput(DataError):
    pass


class OutOfDomain(DataError):
    def __init__(self, message, indices=()):
        self.indices = tuple(indices)
        super().__init__(message)


# trees / explain / evaltune
class ShapeMismatch(UsageError):
    pass


class MissingCover(UsageError):
    pass


class TooManyFeatures(UsageError):
    pass


class RowOutOfRange(UsageError):
    pass


class UnknownFeature(UsageError):
    def __init__(self, feature):
        self.feature = feature
        super().__init__(f"unknown feature {feature!r}")


class ZeroVariance(DataError):
    pass


class BadK(UsageError):
    pass


class TooFewRows(DataError):
    pass


class ModelFitFailure(PlayerValueError):
    pass


class FoldError(PlayerValueError):
    """A fit or scoring failure inside one cross-validation fold."""

    def __init__(self, fold, cause):
        self.fold = fold
        self.cause = cause
        super().__init__(f"fold {fold}: {cause}")


class ConfigError(UsageError):
    pass
