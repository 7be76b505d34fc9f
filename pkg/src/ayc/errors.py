"""Error hierarchy shared by every module.

Each error carries a stable machine-readable ``code`` and the HTTP status
the service maps it to.  The CLI prints the same code on stderr, so
scripted callers see one vocabulary everywhere.
"""

from __future__ import annotations

from typing import Any, Optional


class WorkbenchError(Exception):
    """Base class; ``code`` is stable, ``message`` is for humans."""

    code = "internal_error"
    http_status = 500

    def __init__(self, message: str, details: Optional[dict[str, Any]] = None):
        super().__init__(message)
        self.message = message
        self.details = details

    def to_json(self) -> dict[str, Any]:
        body: dict[str, Any] = {"code": self.code, "message": self.message}
        if self.details:
            body["details"] = self.details
        return body


# --- model runtime ---------------------------------------------------------

class ModelFileNotFoundError(WorkbenchError):
    code = "file_not_found"
    http_status = 404


class InvalidModelFileError(WorkbenchError):
    code = "invalid_model_file"
    http_status = 422


class SignatureMismatchError(WorkbenchError):
    code = "signature_mismatch"
    http_status = 422


class DuplicateModelIdError(WorkbenchError):
    code = "duplicate_model_id"
    http_status = 422


class UnknownModelIdError(WorkbenchError):
    code = "unknown_model_id"
    http_status = 404


class UnsupportedImageFormatError(WorkbenchError):
    code = "unsupported_image_format"
    http_status = 400


class ShapeMismatchError(WorkbenchError):
    code = "shape_mismatch"
    http_status = 422


class InferenceFailureError(WorkbenchError):
    code = "inference_failure"
    http_status = 422


# --- evaluation ------------------------------------------------------------

class UnknownClassIdError(WorkbenchError):
    code = "unknown_class_id"
    http_status = 400


class EmptyInputError(WorkbenchError):
    code = "empty_input"
    http_status = 400


class MalformedLogError(WorkbenchError):
    code = "malformed_log"
    http_status = 400


class NonMonotoneEpochsError(WorkbenchError):
    code = "non_monotone_epochs"
    http_status = 400


# --- annotations -----------------------------------------------------------

class RevisionConflictError(WorkbenchError):
    code = "revision_conflict"
    http_status = 409


class UnknownBoxIdError(WorkbenchError):
    code = "unknown_box_id"
    http_status = 404


class OutOfBoundsError(WorkbenchError):
    code = "out_of_bounds"
    http_status = 400


class UnknownClassError(WorkbenchError):
    code = "unknown_class"
    http_status = 400


class DimsMissingError(WorkbenchError):
    code = "dims_missing"
    http_status = 400


class ParseError(WorkbenchError):
    code = "parse_error"
    http_status = 400


class InconsistentDimsError(WorkbenchError):
    code = "inconsistent_dims"
    http_status = 400


# --- dataset ---------------------------------------------------------------

class DirUnreadableError(WorkbenchError):
    code = "dir_unreadable"
    http_status = 400


class DuplicateImageIdError(WorkbenchError):
    code = "duplicate_image_id"
    http_status = 400


class BadRatiosError(WorkbenchError):
    code = "bad_ratios"
    http_status = 400


class TooFewImagesError(WorkbenchError):
    code = "too_few_images"
    http_status = 400


class MissingAnnotationsError(WorkbenchError):
    code = "missing_annotations"
    http_status = 400


class UnknownImageIdError(WorkbenchError):
    code = "unknown_image_id"
    http_status = 404


# --- service ---------------------------------------------------------------

class PortInUseError(WorkbenchError):
    code = "port_in_use"
    http_status = 500


class ProjectDirUnwritableError(WorkbenchError):
    code = "project_dir_unwritable"
    http_status = 500


class UnknownRunIdError(WorkbenchError):
    code = "unknown_run_id"
    http_status = 404


class ValidationError(WorkbenchError):
    """Request-level validation failure not tied to a specific module error."""

    code = "validation_error"
    http_status = 400
