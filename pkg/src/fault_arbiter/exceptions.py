from typing import Any
from fastapi import status

# Exception hierarchy:
#
# FaultArbiterError (base)                     exit  http
# ├── ConfigurationError                         2   400
# ├── InputValidationError                       3   422
# │   ├── SignalLengthError                      3   422
# │   ├── DegenerateSignalError                  3   422
# │   ├── DegenerateSpectrumError                3   422
# │   └── MetadataError                          3   422
# ├── VerdictParseError                          3   422
# ├── MetricError                                3   422
# ├── InsufficientDataError                      4   422
# ├── CalibrationFitError                        4   422
# ├── DataLeakageError                           4   409
# ├── PersistenceError                           5   500
# ├── RenderError                                1   500
# └── ArbiterUnavailableError                    6   503
#     └── RecordingNotFoundError                 6   404


class FaultArbiterError(Exception):
    """
    Base exception for all fault-arbiter errors.

    Every error raised by the package is a subclass, so callers (the CLI,
    the replay server) only need a single handler. Each error carries both
    a process exit code and an HTTP status code.
    """

    exit_code: int = 1

    def __init__(
        self,
        message: str,
        http_status_code: int = status.HTTP_500_INTERNAL_SERVER_ERROR,
        details: dict[str, Any] | None = None,
        original_exception: Exception | None = None,
        exit_code: int | None = None,
    ) -> None:
        self.message = message
        self.http_status_code = http_status_code
        self.details = details or {}
        self.original_exception = original_exception
        if exit_code is not None:
            self.exit_code = exit_code
        super().__init__(self.message)


# === Configuration ===


class ConfigurationError(FaultArbiterError):
    """Raised when run configuration or an operation's settings are invalid."""

    exit_code = 2

    def __init__(
        self,
        message: str,
        config_key: str | None = None,
        config_path: str | None = None,
        details: dict[str, Any] | None = None,
        original_exception: Exception | None = None,
    ) -> None:
        details = details or {}
        if config_key:
            details["config_key"] = config_key
        if config_path:
            details["config_path"] = config_path

        super().__init__(
            message=message,
            http_status_code=status.HTTP_400_BAD_REQUEST,
            details=details,
            original_exception=original_exception,
        )


# === Input Errors ===


class InputValidationError(FaultArbiterError):
    """Raised when a signal, feature vector or other input violates its contract."""

    exit_code = 3

    def __init__(
        self,
        message: str,
        field: str | None = None,
        details: dict[str, Any] | None = None,
        original_exception: Exception | None = None,
    ) -> None:
        details = details or {}
        if field:
            details["field"] = field

        super().__init__(
            message=message,
            http_status_code=status.HTTP_422_UNPROCESSABLE_ENTITY,
            details=details,
            original_exception=original_exception,
        )


class SignalLengthError(InputValidationError):
    """Raised when a signal is too short for the requested analysis."""

    def __init__(self, length: int, required: int, signal_id: str | None = None) -> None:
        super().__init__(
            message=f"Signal has {length} samples, at least {required} required",
            field="samples",
            details={
                "length": length,
                "required": required,
                "signal_id": signal_id,
                "suggestion": "Increase duration or sample_rate so the signal covers one FFT frame",
            },
        )


class DegenerateSignalError(InputValidationError):
    """Raised when a signal has zero variance (constant or all-zero)."""

    def __init__(self, message: str, signal_id: str | None = None) -> None:
        super().__init__(
            message=message,
            field="samples",
            details={
                "signal_id": signal_id,
                "suggestion": "Check the sensor channel; a constant signal carries no vibration content",
            },
        )


class DegenerateSpectrumError(InputValidationError):
    """Raised when a spectrum has zero total magnitude."""

    def __init__(self, kind: str) -> None:
        super().__init__(
            message=f"{kind} spectrum has zero total magnitude",
            field="magnitudes",
            details={"spectrum_kind": kind},
        )


class MetadataError(InputValidationError):
    """Raised when signal metadata (shaft frequency, sample rate) is unusable."""

    def __init__(self, message: str, field: str, value: Any) -> None:
        super().__init__(message=message, field=field, details={"value": value})


class VerdictParseError(FaultArbiterError):
    """Raised when an arbiter response has no recognizable diagnosis line."""

    exit_code = 3

    def __init__(self, message: str, excerpt: str = "") -> None:
        super().__init__(
            message=message,
            http_status_code=status.HTTP_422_UNPROCESSABLE_ENTITY,
            details={"excerpt": excerpt[:200]},
        )


class MetricError(FaultArbiterError):
    """Raised when a metric cannot be computed from the given inputs."""

    exit_code = 3

    def __init__(self, message: str, metric: str) -> None:
        super().__init__(
            message=message,
            http_status_code=status.HTTP_422_UNPROCESSABLE_ENTITY,
            details={"metric": metric},
        )


# === Fitting Errors ===


class InsufficientDataError(FaultArbiterError):
    """Raised when a fit lacks the minimum number of samples."""

    exit_code = 4

    def __init__(
        self,
        message: str,
        counts: dict[str, int] | None = None,
        required: int | None = None,
    ) -> None:
        super().__init__(
            message=message,
            http_status_code=status.HTTP_422_UNPROCESSABLE_ENTITY,
            details={
                "counts": counts or {},
                "required": required,
                "suggestion": "Increase --per-class or check the split ratio",
            },
        )


class CalibrationFitError(FaultArbiterError):
    """Raised when a calibration map cannot be fitted."""

    exit_code = 4

    def __init__(self, message: str, method: str) -> None:
        super().__init__(
            message=message,
            http_status_code=status.HTTP_422_UNPROCESSABLE_ENTITY,
            details={"method": method},
        )


class DataLeakageError(FaultArbiterError):
    """Raised when held-out test samples would enter (or were used by) a fit."""

    exit_code = 4

    def __init__(self, message: str, leaked_ids: list[str] | None = None) -> None:
        leaked_ids = leaked_ids or []
        super().__init__(
            message=message,
            http_status_code=status.HTTP_409_CONFLICT,
            details={
                "leaked_ids": leaked_ids[:20],
                "n_leaked": len(leaked_ids),
                "suggestion": "Refit the calibration bundle with 'fault-arbiter calibrate' on the val split",
            },
        )


# === Output Errors ===


class PersistenceError(FaultArbiterError):
    """Raised when reading or writing a run artifact fails."""

    exit_code = 5

    def __init__(
        self,
        message: str,
        path: str | None = None,
        original_exception: Exception | None = None,
    ) -> None:
        super().__init__(
            message=message,
            http_status_code=status.HTTP_500_INTERNAL_SERVER_ERROR,
            details={"path": path} if path else {},
            original_exception=original_exception,
        )


class RenderError(FaultArbiterError):
    """Raised when a diagnostic chart cannot be rendered."""

    def __init__(self, message: str, panel: str | None = None) -> None:
        super().__init__(
            message=message,
            http_status_code=status.HTTP_500_INTERNAL_SERVER_ERROR,
            details={"panel": panel} if panel else {},
        )


# === Arbiter Errors ===


class ArbiterUnavailableError(FaultArbiterError):
    """Raised when the arbiter backend cannot produce a usable verdict."""

    exit_code = 6

    def __init__(
        self,
        message: str,
        reason: str,
        http_status_code: int = status.HTTP_503_SERVICE_UNAVAILABLE,
        details: dict[str, Any] | None = None,
        original_exception: Exception | None = None,
    ) -> None:
        details = details or {}
        details["reason"] = reason
        details.setdefault(
            "suggestion",
            "Check the endpoint base_url and that FAULT_ARBITER_API_KEY is set, or use --backend oracle",
        )
        super().__init__(
            message=message,
            http_status_code=http_status_code,
            details=details,
            original_exception=original_exception,
        )


class RecordingNotFoundError(ArbiterUnavailableError):
    """Raised by the replay endpoint when no recorded response exists for a case."""

    def __init__(self, case_id: str | None) -> None:
        super().__init__(
            message=f"No recorded response for case '{case_id}'",
            reason="recording_missing",
            http_status_code=status.HTTP_404_NOT_FOUND,
            details={
                "case_id": case_id,
                "suggestion": "Record the case with the llm backend and an audit log first",
            },
        )


# === Exception Translation Functions ===


def translate_transport_exception(
    exception: Exception, context: dict[str, Any] | None = None
) -> FaultArbiterError:
    """
    Translate httpx exceptions into domain-specific exceptions.

    Args:
        exception: The exception raised by the HTTP client
        context: Additional context (e.g. url, attempts, case_id)

    Returns:
        ArbiterUnavailableError describing the failure, or the exception
        itself when it already is a FaultArbiterError
    """
    import httpx

    context = context or {}

    if isinstance(exception, FaultArbiterError):
        return exception

    if isinstance(exception, httpx.TimeoutException):
        return ArbiterUnavailableError(
            message=f"Arbiter endpoint timed out: {exception}",
            reason="timeout",
            details=dict(context),
            original_exception=exception,
        )

    elif isinstance(exception, httpx.HTTPStatusError):
        code = exception.response.status_code
        details = dict(context)
        details["status_code"] = code
        details["body"] = exception.response.text[:500]
        return ArbiterUnavailableError(
            message=f"Arbiter endpoint returned HTTP {code}",
            reason="http_status",
            details=details,
            original_exception=exception,
        )

    elif isinstance(exception, httpx.TransportError):
        return ArbiterUnavailableError(
            message=f"Arbiter endpoint unreachable: {exception}",
            reason="transport",
            details=dict(context),
            original_exception=exception,
        )

    elif isinstance(exception, (KeyError, IndexError, TypeError, ValueError)):
        return ArbiterUnavailableError(
            message=f"Malformed arbiter response: {exception}",
            reason="malformed_response",
            details=dict(context),
            original_exception=exception,
        )

    return FaultArbiterError(
        message=f"Unexpected arbiter error: {exception}",
        original_exception=exception,
    )


def translate_validation_exception(
    exception: Exception, config_path: str | None = None
) -> ConfigurationError:
    """
    Translate pydantic validation errors from settings loading.

    Args:
        exception: pydantic.ValidationError (or a TOML decode error)
        config_path: Path of the TOML file being loaded, if any
    """
    from pydantic import ValidationError

    if isinstance(exception, ValidationError):
        problems = [
            {
                "location": ".".join(str(part) for part in err["loc"]),
                "problem": err["msg"],
            }
            for err in exception.errors()
        ]
        first = problems[0] if problems else {"location": "?", "problem": str(exception)}
        return ConfigurationError(
            message=f"Invalid configuration at '{first['location']}': {first['problem']}",
            config_key=first["location"],
            config_path=config_path,
            details={"errors": problems},
            original_exception=exception,
        )

    return ConfigurationError(
        message=f"Could not parse configuration: {exception}",
        config_path=config_path,
        original_exception=exception,
    )


# === Factory Functions ===


def create_configuration_missing_error(config_file: str) -> ConfigurationError:
    """A --config path that does not exist."""
    return ConfigurationError(
        message=f"Configuration file not found: {config_file}",
        config_path=config_file,
        details={"suggestion": "Pass --config with an existing TOML file, or start from fault_arbiter.example.toml"},
    )


def create_insufficient_data_error(
    stage: str, counts: dict[str, int], required: int
) -> InsufficientDataError:
    """
    Factory function for creating errors about under-populated classes.

    Args:
        stage: The fit that failed (e.g. "naive bayes fit")
        counts: Samples available per class
        required: Minimum samples per class
    """
    short = sorted(name for name, count in counts.items() if count < required)
    return InsufficientDataError(
        message=f"{stage}: classes with fewer than {required} samples: {', '.join(short)}",
        counts=counts,
        required=required,
    )


def create_leakage_error(leaked_ids: list[str], fit_split: str) -> DataLeakageError:
    """
    Factory function for creating test-split leakage errors.
    """
    if leaked_ids:
        message = (
            f"Calibration bundle was fit on {len(leaked_ids)} test-split samples "
            f"(fit split '{fit_split}')"
        )
    else:
        message = f"Calibration bundle was fit on split '{fit_split}', only 'val' is allowed"
    return DataLeakageError(message=message, leaked_ids=leaked_ids)
