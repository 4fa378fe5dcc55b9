"""Exception hierarchy shared by every facepad module.

Each class carries a short ``code`` that the command line prints as the
machine-parsable error class.
"""


class FacePadError(Exception):
    code = "facepad-error"


class InvalidShapeError(FacePadError, ValueError):
    code = "invalid-shape"


class InvalidInputError(FacePadError, ValueError):
    code = "invalid-input"


class InvalidBatchError(FacePadError, ValueError):
    code = "invalid-batch"


class InvalidLabelError(FacePadError, ValueError):
    code = "invalid-label"


class NumericFailureError(FacePadError, ArithmeticError):
    code = "numeric-failure"


class ParseError(FacePadError, ValueError):
    code = "parse-error"


class ValidationError(FacePadError, ValueError):
    code = "validation-error"


class InsufficientDataError(FacePadError, ValueError):
    code = "insufficient-data"


class FileFormatError(FacePadError):
    """Base for checkpoint and feature-cache load failures."""

    code = "file-format"


class CorruptHeaderError(FileFormatError):
    code = "corrupt-header"


class ShapeMismatchError(FileFormatError):
    code = "shape-mismatch"


class TruncatedPayloadError(FileFormatError):
    code = "truncated-payload"
