"""Exception types shared across the package.

Every error carries a stable machine-readable ``code`` (used verbatim in the
HTTP error envelope) and a default HTTP status for the API tier.
"""

from __future__ import annotations


class BasinError(Exception):
    code = "error"
    http_status = 400

    def __init__(self, message: str = "", detail: object | None = None):
        super().__init__(message or self.code)
        self.message = message or self.code
        self.detail = detail


class ValidationError(BasinError):
    code = "invalid"


class InvalidRange(BasinError):
    code = "invalid-range"


class OutOfRange(BasinError):
    code = "out-of-range"


class EmptyInput(BasinError):
    code = "empty-input"


class ParseError(BasinError):
    code = "parse-error"

    def __init__(self, line: int, message: str = ""):
        super().__init__(message or f"unparseable content at line {line}",
                         detail={"line": line})
        self.line = line


class DuplicateDate(BasinError):
    code = "duplicate-date"

    def __init__(self, day, message: str = ""):
        super().__init__(message or f"conflicting values for {day.isoformat()}",
                         detail={"date": day.isoformat()})
        self.day = day


class InvalidFormatSpec(BasinError):
    code = "invalid-format-spec"


class NotFound(BasinError):
    code = "not-found"
    http_status = 404


class UnknownStation(NotFound):
    code = "unknown-station"


class UnknownCatchment(NotFound):
    code = "unknown-catchment"


class Forbidden(BasinError):
    code = "forbidden"
    http_status = 403


class Unauthorized(BasinError):
    code = "unauthorized"
    http_status = 401


class AuthFailed(BasinError):
    code = "auth-failed"
    http_status = 401


class InsufficientData(BasinError):
    code = "insufficient-data"


class InsufficientOverlap(BasinError):
    code = "insufficient-overlap"


class DegenerateInput(BasinError):
    code = "degenerate-input"


class NoFilledVersion(BasinError):
    code = "no-filled-version"


class InsufficientPairs(BasinError):
    code = "insufficient-pairs"


class WeakCorrelation(BasinError):
    code = "weak-correlation"


class VariableMismatch(BasinError):
    code = "variable-mismatch"


class NoNeighbors(BasinError):
    code = "no-neighbors"


class NonPrecipitation(BasinError):
    code = "non-precipitation"


class ZeroMean(BasinError):
    code = "zero-mean"


class OverwriteAttempt(BasinError):
    code = "overwrite-attempt"

    def __init__(self, day, message: str = ""):
        super().__init__(message or f"value already observed on {day.isoformat()}",
                         detail={"date": day.isoformat()})
        self.day = day


class NoOp(BasinError):
    code = "no-op"


class StaleWrite(BasinError):
    code = "stale-write"
    http_status = 409


class StalePreview(StaleWrite):
    code = "stale-preview"


class BadMagic(BasinError):
    code = "bad-magic"


class UnsupportedShapeType(BasinError):
    code = "unsupported-shape-type"

    def __init__(self, shape_type: int, message: str = ""):
        super().__init__(message or f"unsupported shape type {shape_type}",
                         detail={"shapeType": shape_type})
        self.shape_type = shape_type


class TruncatedRecord(BasinError):
    code = "truncated-record"


class TooLarge(BasinError):
    code = "too-large"
    http_status = 413
