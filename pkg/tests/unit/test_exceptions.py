"""
Tests for the exception hierarchy, translation helpers and handlers.
"""

import io
import json

import httpx
import pytest

from fault_arbiter.exception_handlers import cli_error_handler, error_payload
from fault_arbiter.exceptions import (
    ArbiterUnavailableError,
    ConfigurationError,
    DataLeakageError,
    FaultArbiterError,
    InputValidationError,
    InsufficientDataError,
    PersistenceError,
    RecordingNotFoundError,
    SignalLengthError,
    create_configuration_missing_error,
    create_insufficient_data_error,
    create_leakage_error,
    translate_transport_exception,
    translate_validation_exception,
)


class TestExitCodes:
    """Test the exit and status codes carried by each error family."""

    @pytest.mark.parametrize(
        "error, exit_code, http_status",
        [
            (FaultArbiterError("boom"), 1, 500),
            (ConfigurationError("bad"), 2, 400),
            (InputValidationError("bad"), 3, 422),
            (SignalLengthError(100, 4096), 3, 422),
            (InsufficientDataError("few"), 4, 422),
            (DataLeakageError("leak"), 4, 409),
            (PersistenceError("disk"), 5, 500),
            (ArbiterUnavailableError("down", reason="timeout"), 6, 503),
            (RecordingNotFoundError("normal_0001"), 6, 404),
        ],
    )
    def test_codes(self, error, exit_code, http_status):
        """Test exit and HTTP codes per class."""
        assert error.exit_code == exit_code
        assert error.http_status_code == http_status

    def test_signal_length_details(self):
        """Test that a short signal reports length, requirement and a suggestion."""
        error = SignalLengthError(100, 4096, signal_id="normal_0001")

        assert error.message == "Signal has 100 samples, at least 4096 required"
        assert error.details["required"] == 4096
        assert error.details["signal_id"] == "normal_0001"
        assert "suggestion" in error.details


class TestFactories:
    """Test the create_* factory functions."""

    def test_configuration_missing(self):
        error = create_configuration_missing_error("run.toml")

        assert error.message == "Configuration file not found: run.toml"
        assert "example.toml" in error.details["suggestion"]
        assert error.details["config_path"] == "run.toml"

    def test_insufficient_data_names_short_classes(self):
        error = create_insufficient_data_error(
            "naive bayes fit", {"normal": 5, "imbalance": 1, "looseness": 0}, required=2
        )

        assert error.message == "naive bayes fit: classes with fewer than 2 samples: imbalance, looseness"
        assert error.details["counts"]["normal"] == 5
        assert error.details["required"] == 2

    def test_leakage_with_ids(self):
        ids = [f"normal_{i:04d}" for i in range(30)]

        error = create_leakage_error(ids, "test")

        assert "30 test-split samples" in error.message
        assert error.details["n_leaked"] == 30
        assert len(error.details["leaked_ids"]) == 20

    def test_leakage_without_ids(self):
        error = create_leakage_error([], "train")

        assert error.message == "Calibration bundle was fit on split 'train', only 'val' is allowed"


class TestTranslation:
    """Test translation of third-party exceptions."""

    def test_timeout(self):
        exc = httpx.ReadTimeout("read timed out")

        error = translate_transport_exception(exc, {"attempts": 4})

        assert isinstance(error, ArbiterUnavailableError)
        assert error.details["reason"] == "timeout"
        assert error.details["attempts"] == 4
        assert error.original_exception is exc

    def test_http_status(self):
        request = httpx.Request("POST", "http://testserver/v1/chat/completions")
        response = httpx.Response(429, text="slow down", request=request)
        exc = httpx.HTTPStatusError("429", request=request, response=response)

        error = translate_transport_exception(exc)

        assert error.details["reason"] == "http_status"
        assert error.details["status_code"] == 429
        assert error.details["body"] == "slow down"

    def test_connect_error(self):
        error = translate_transport_exception(httpx.ConnectError("refused"))

        assert error.details["reason"] == "transport"

    def test_malformed_response(self):
        error = translate_transport_exception(KeyError("choices"))

        assert error.details["reason"] == "malformed_response"

    def test_domain_error_passes_through(self):
        original = RecordingNotFoundError("x")

        assert translate_transport_exception(original) is original

    def test_non_validation_error(self):
        error = translate_validation_exception(ValueError("bad toml"), "run.toml")

        assert error.message == "Could not parse configuration: bad toml"
        assert error.details["config_path"] == "run.toml"


class TestCliErrorHandler:
    """Test the CLI error reporting."""

    def test_writes_json_line_and_returns_exit_code(self):
        stream = io.StringIO()
        error = ConfigurationError("Invalid configuration", config_key="arbitration.theta")

        code = cli_error_handler(error, stream=stream)

        payload = json.loads(stream.getvalue())
        assert code == 2
        assert payload["error"] == "ConfigurationError"
        assert payload["message"] == "Invalid configuration"
        assert payload["config_key"] == "arbitration.theta"

    def test_error_payload_merges_details(self):
        payload = error_payload(RecordingNotFoundError("gear_fault_0002"))

        assert payload["error"] == "RecordingNotFoundError"
        assert payload["case_id"] == "gear_fault_0002"
        assert payload["reason"] == "recording_missing"
