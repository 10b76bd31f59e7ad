"""Exception hierarchy. Every failure the library reports on bad input is a
subclass of :class:`DgnnError`, so callers (and the CLI) can catch one type."""

from __future__ import annotations


class DgnnError(Exception):
    """Base class for all structured errors raised by dgnnflow."""


# graph-core validation
class ValidationError(DgnnError):
    pass


class RowPtrNotMonotone(ValidationError):
    pass


class ColIdxOutOfRange(ValidationError):
    pass


class RenumberNotBijective(ValidationError):
    pass


class EmbedShapeMismatch(ValidationError):
    pass


class NonFiniteValue(ValidationError):
    pass


# preprocess
class EmptyEdgeList(DgnnError):
    pass


class EndpointNotInTable(DgnnError):
    pass


# kernels / models / executors
class ShapeMismatch(DgnnError):
    pass


class IncompatibleExecutor(DgnnError):
    pass


class PipelineAborted(DgnnError):
    """A pipeline worker failed; the original exception is chained."""


# dataset loading
class DatasetError(DgnnError):
    pass


class ParseError(DatasetError):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


class MissingColumn(ParseError):
    pass


class EmptyFile(DatasetError):
    pass


# weight files
class WeightFileError(DgnnError):
    pass


class BadMagic(WeightFileError):
    pass


class VersionMismatch(WeightFileError):
    pass


class TruncatedFile(WeightFileError):
    pass


class ShapeOverflow(WeightFileError):
    pass
