"""
Exception handlers for converting domain exceptions to responses.

The replay endpoint maps FaultArbiterError to JSON HTTP responses; the CLI
maps it to a structured JSON message on stderr and a nonzero exit code.
"""

import json
import logging
import sys
from typing import TextIO

from fastapi import Request
from fastapi.responses import JSONResponse

from fault_arbiter.exceptions import FaultArbiterError


logger = logging.getLogger(__name__)


def error_payload(exc: FaultArbiterError) -> dict:
    """Consistent error body shared by the HTTP and CLI handlers."""
    return {
        "error": type(exc).__name__,
        "message": exc.message,
        **exc.details,
    }


def _log_domain_error(exc: FaultArbiterError, **context) -> None:
    logger.error(
        f"{type(exc).__name__}: {exc.message}",
        extra={"exception_type": type(exc).__name__, "details": exc.details, **context},
        exc_info=exc.original_exception,
    )


async def arbiter_error_handler(request: Request, exc: FaultArbiterError) -> JSONResponse:
    """Replay endpoint: domain error to a JSON body with the error's HTTP status."""
    _log_domain_error(exc, http_status=exc.http_status_code, path=request.url.path)
    return JSONResponse(status_code=exc.http_status_code, content=error_payload(exc))


async def generic_exception_handler(request: Request, exc: Exception) -> JSONResponse:
    """
    Catch-all handler for unexpected exceptions.

    Returns:
        JSONResponse with 500 status code
    """
    logger.exception(
        f"Unexpected error: {str(exc)}",
        extra={
            "exception_type": type(exc).__name__,
            "path": request.url.path,
            "method": request.method,
        },
    )

    return JSONResponse(
        status_code=500,
        content={
            "error": "InternalServerError",
            "message": "An unexpected error occurred",
            "details": {"suggestion": "Check the replay server log for the traceback"},
        },
    )


def cli_error_handler(exc: FaultArbiterError, stream: TextIO | None = None) -> int:
    """
    Report a FaultArbiterError raised by a CLI command.

    Logs the error and writes the structured payload as one JSON line.

    Returns:
        The process exit code carried by the exception
    """
    _log_domain_error(exc, exit_code=exc.exit_code)
    stream = stream or sys.stderr
    stream.write(json.dumps(error_payload(exc), default=str) + "\n")
    return exc.exit_code
