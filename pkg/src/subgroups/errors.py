"""Exception hierarchy.

``InputError`` subclasses describe a bad request (config, schema, k out of
range) and map to CLI exit code 1; everything else maps to exit code 2.
"""


class SubgroupsError(Exception):
    """Base class for all package errors."""

    @property
    def code(self) -> str:
        return type(self).__name__


class InputError(SubgroupsError):
    pass


# core data
class NegativeValue(InputError):
    pass


class SingleClass(SubgroupsError):
    pass


class UnknownReferenceLevel(InputError):
    pass


class AllRowsDropped(SubgroupsError):
    pass


class SchemaError(InputError):
    pass


# ingestion
class DataFileNotFound(InputError):
    pass


class HeaderMismatch(InputError):
    def __init__(self, missing, extra):
        self.missing = sorted(missing)
        self.extra = sorted(extra)
        super().__init__(f"header mismatch: missing={self.missing} extra={self.extra}")


class ParseError(InputError):
    def __init__(self, row, column, token, reason=""):
        self.row, self.column, self.token = row, column, token
        msg = f"row {row}, column {column!r}: cannot parse {token!r}"
        super().__init__(msg + (f" ({reason})" if reason else ""))


class UnknownCategoryLevel(ParseError):
    pass


class UnknownProfile(InputError):
    pass


class InvalidSpec(InputError):
    pass


# clustering / selection
class KTooLarge(InputError):
    pass


class EmptyDataset(SubgroupsError):
    pass


class SchemaMismatch(SubgroupsError):
    pass


class NoWithinPairs(SubgroupsError):
    pass


class SingleCluster(SubgroupsError):
    pass


class InsufficientRows(SubgroupsError):
    pass


# tests / models
class SingularCovariance(SubgroupsError):
    pass


class TooFewRows(SubgroupsError):
    pass


class TooManyFeatures(SubgroupsError):
    pass


class RankDeficient(SubgroupsError):
    pass


class OutOfRange(InputError):
    pass


class ConfigError(InputError):
    pass


class StageError(SubgroupsError):
    """A pipeline stage failed; ``completed`` lists the stages that finished."""

    def __init__(self, stage, cause, completed):
        self.stage = stage
        self.cause = cause
        self.completed = list(completed)
        super().__init__(f"stage {stage!r} failed: {cause.code}: {cause}")

    @property
    def code(self) -> str:
        return self.cause.code
