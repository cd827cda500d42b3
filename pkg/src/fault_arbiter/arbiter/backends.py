"""
Arbiter backends.

- OracleBackend: the deterministic rule table, no text round trip
- ChatCompletionsBackend: OpenAI-compatible HTTP endpoint via httpx, one
  request per self-consistency sample, bounded concurrency, exponential
  backoff and an optional JSONL audit log
- RecordedBackend: replays recorded report texts in process
"""

import base64
import hashlib
import json
import logging
import threading
import time
from abc import ABC, abstractmethod
from collections.abc import Callable, Mapping, Sequence
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Any, Optional

import httpx
from pydantic import SecretStr

from fault_arbiter.arbiter.oracle import DEFAULT_NORMAL_BASELINE, NormalBaseline, OracleVerdict, oracle_arbiter
from fault_arbiter.exceptions import (
    FaultArbiterError,
    PersistenceError,
    RecordingNotFoundError,
    translate_transport_exception,
)
from fault_arbiter.schemas.diagnosis_schema import PromptBundle
from fault_arbiter.schemas.enums import BackendKind
from fault_arbiter.schemas.feature_schema import FeatureVector
from fault_arbiter.schemas.settings_schema import LlmEndpointSettings


logger = logging.getLogger(__name__)


class OracleBackend:
    """Rule-table arbiter; deterministic, so one sample is enough."""

    kind = BackendKind.ORACLE

    def __init__(self, baseline: NormalBaseline = DEFAULT_NORMAL_BASELINE) -> None:
        self.baseline = baseline

    def judge(self, features: FeatureVector) -> OracleVerdict:
        return oracle_arbiter(features, self.baseline)


class ArbiterBackend(ABC):
    """A source of free-text arbiter reports."""

    kind = BackendKind.LLM

    @abstractmethod
    def complete(self, bundle: PromptBundle, k: int) -> list[str]:
        """
        Request k independent reports for one prompt.

        Returns:
            The reports that were obtained (at least one)

        Raises:
            ArbiterUnavailableError: If no report could be obtained
        """

    def close(self) -> None:
        """Release transport resources."""


# === HTTP Backend ===


class ChatCompletionsBackend(ArbiterBackend):
    """
    Client for an OpenAI-compatible /chat/completions endpoint.

    The K samples of a case are requested concurrently; a semaphore shared by
    all callers caps in-flight requests at settings.max_concurrency.
    Transport errors, timeouts, 429 and 5xx responses are retried with
    delays of backoff_base * 2**attempt. Other 4xx responses and malformed
    bodies fail immediately.
    """

    def __init__(
        self,
        settings: LlmEndpointSettings,
        api_key: SecretStr | str | None = None,
        client: Optional[httpx.Client] = None,
        audit_path: Optional[Path] = None,
        sleep: Callable[[float], None] = time.sleep,
    ) -> None:
        self.settings = settings
        self._api_key = api_key.get_secret_value() if isinstance(api_key, SecretStr) else api_key
        self._owns_client = client is None
        self._client = client or httpx.Client(timeout=settings.request_timeout)
        self._semaphore = threading.BoundedSemaphore(settings.max_concurrency)
        self._audit_path = audit_path
        self._audit_lock = threading.Lock()
        self._sleep = sleep
        self.url = f"{settings.base_url.rstrip('/')}/chat/completions"

    def close(self) -> None:
        if self._owns_client:
            self._client.close()

    def _headers(self) -> dict[str, str]:
        headers = {"Content-Type": "application/json"}
        if self._api_key:
            headers["Authorization"] = f"Bearer {self._api_key}"
        return headers

    def build_payload(self, bundle: PromptBundle) -> dict[str, Any]:
        """Chat-completions request body: system text, user text and the panel as a data URL."""
        content: list[dict[str, Any]] = [{"type": "text", "text": bundle.user_text}]
        if bundle.image_ref is not None:
            try:
                png = bundle.image_ref.read_bytes()
            except OSError as exc:
                raise PersistenceError(
                    f"Could not read panel image: {exc}", str(bundle.image_ref), exc
                ) from exc
            encoded = base64.b64encode(png).decode("ascii")
            content.append(
                {"type": "image_url", "image_url": {"url": f"data:image/png;base64,{encoded}"}}
            )
        return {
            "model": self.settings.model,
            "temperature": self.settings.temperature,
            "max_tokens": self.settings.max_tokens,
            "n": 1,
            "messages": [
                {"role": "system", "content": bundle.system_text},
                {"role": "user", "content": content},
            ],
        }

    @staticmethod
    def _response_text(body: dict[str, Any]) -> str:
        content = body["choices"][0]["message"]["content"]
        if isinstance(content, list):
            content = "".join(part.get("text", "") for part in content)
        if not isinstance(content, str):
            raise TypeError("message content is not text")
        return content

    def _audit(self, record: dict[str, Any]) -> None:
        if self._audit_path is None:
            return
        with self._audit_lock:
            try:
                self._audit_path.parent.mkdir(parents=True, exist_ok=True)
                with self._audit_path.open("a", encoding="utf-8") as handle:
                    handle.write(json.dumps(record, sort_keys=True) + "\n")
            except OSError as exc:
                raise PersistenceError(
                    f"Could not write audit log: {exc}", str(self._audit_path), exc
                ) from exc

    @staticmethod
    def _redacted(payload: dict[str, Any]) -> dict[str, Any]:
        """Payload copy with image data replaced by its digest."""
        redacted = json.loads(json.dumps(payload))
        for part in redacted["messages"][1]["content"]:
            if part.get("type") == "image_url":
                data = part["image_url"]["url"].encode("ascii")
                part["image_url"] = {"sha256": hashlib.sha256(data).hexdigest(), "length": len(data)}
        return redacted

    def request_once(self, payload: dict[str, Any], case_id: Optional[str], sample: int) -> str:
        """One sample with retries."""
        last_error: Optional[Exception] = None
        attempts = self.settings.max_retries + 1
        for attempt in range(attempts):
            try:
                with self._semaphore:
                    response = self._client.post(
                        self.url,
                        json=payload,
                        headers=self._headers(),
                        timeout=self.settings.request_timeout,
                    )
                response.raise_for_status()
                text = self._response_text(response.json())
                self._audit(
                    {
                        "case_id": case_id,
                        "sample": sample,
                        "request": self._redacted(payload),
                        "response": text,
                    }
                )
                return text
            except httpx.HTTPStatusError as exc:
                code = exc.response.status_code
                if code < 500 and code != 429:
                    raise translate_transport_exception(
                        exc, {"url": self.url, "case_id": case_id, "attempts": attempt + 1}
                    ) from exc
                last_error = exc
            except (httpx.TimeoutException, httpx.TransportError) as exc:
                last_error = exc
            except (KeyError, IndexError, TypeError, ValueError) as exc:
                raise translate_transport_exception(
                    exc, {"url": self.url, "case_id": case_id, "attempts": attempt + 1}
                ) from exc

            if attempt < attempts - 1:
                delay = self.settings.backoff_base * 2**attempt
                logger.warning(
                    f"Arbiter request failed ({last_error}); retrying in {delay:.2f}s",
                    extra={"case_id": case_id, "attempt": attempt + 1},
                )
                self._sleep(delay)

        error = translate_transport_exception(
            last_error, {"url": self.url, "case_id": case_id, "attempts": attempts}
        )
        try:
            self._audit({"case_id": case_id, "sample": sample, "error": error.message})
        except PersistenceError as exc:
            # the transport failure is the error the caller handles
            logger.warning(
                f"Audit entry for failed request dropped: {exc.message}",
                extra={"case_id": case_id, "sample": sample},
            )
        raise error

    def complete(self, bundle: PromptBundle, k: int) -> list[str]:
        payload = self.build_payload(bundle)
        errors: list[FaultArbiterError] = []
        texts: list[str] = []

        def run(sample: int) -> Optional[str]:
            try:
                return self.request_once(payload, bundle.case_id, sample)
            except FaultArbiterError as exc:
                errors.append(exc)
                return None

        workers = max(1, min(k, self.settings.max_concurrency))
        with ThreadPoolExecutor(max_workers=workers) as executor:
            for text in executor.map(run, range(k)):
                if text is not None:
                    texts.append(text)

        if not texts:
            raise errors[0]
        if errors:
            logger.warning(
                f"{len(errors)} of {k} samples failed for case '{bundle.case_id}'",
                extra={"case_id": bundle.case_id},
            )
        return texts


# === Recorded Backend ===


class RecordedBackend(ArbiterBackend):
    """Replays recorded report texts per case id, cycling when k exceeds the recording."""

    def __init__(self, responses: Mapping[str, Sequence[str]]) -> None:
        self._responses = {case: list(texts) for case, texts in responses.items()}

    def complete(self, bundle: PromptBundle, k: int) -> list[str]:
        texts = self._responses.get(bundle.case_id or "")
        if not texts:
            raise RecordingNotFoundError(bundle.case_id)
        return [texts[i % len(texts)] for i in range(k)]
