"""Domain error types shared across the package."""

from __future__ import annotations


class RegmapError(Exception):
    """Base class for all domain errors raised by this package."""


class ParseError(RegmapError):
    """A row of an input file could not be parsed or validated."""

    def __init__(self, message: str, line_no: int | None = None):
        self.line_no = line_no
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)


class MissingFieldError(ParseError):
    """A required field is absent or empty."""

    def __init__(self, field: str, line_no: int | None = None):
        self.field = field
        super().__init__(f"missing required field {field!r}", line_no)


class DuplicateControlIdError(RegmapError):
    """Two controls share a control_id within one regulation."""


class UnknownLabelError(RegmapError):
    """A check references a control id that was never loaded."""


class DuplicateDocIdError(RegmapError):
    """A document id is already present in the index."""


class InvalidDocumentError(RegmapError):
    """A document violates index invariants (e.g. empty label set)."""


class EmptyCorpusError(RegmapError):
    """An index build was attempted over zero documents."""


class UnknownDocIdError(RegmapError):
    """A score was requested for a document not in the index."""


class EmptyIndexError(RegmapError):
    """A search was attempted against an index with no documents."""


class EmptyTrainingSetError(RegmapError):
    """Training or vocabulary construction got zero examples."""


class ShapeMismatchError(RegmapError):
    """Model parameter shapes are mutually inconsistent."""


class NonFiniteLossError(RegmapError):
    """Training diverged to a NaN or infinite loss."""


class ModelNotTrainedError(RegmapError):
    """A prediction was requested before any model was trained."""


class UnknownRegulationError(RegmapError):
    """The named regulation has not been ingested."""


class InvalidFeedbackError(RegmapError):
    """A feedback record violates its invariants."""


class DuplicateFeedbackIdError(RegmapError):
    """A feedback id was already submitted."""


class DatasetTooSmallError(RegmapError):
    """The dataset cannot be split into the requested folds."""


class PoolSizeMismatchError(RegmapError):
    """The feedback pool does not divide into equal iterations."""


class SnapshotFormatError(RegmapError):
    """A persisted index or model file has an unreadable format."""
