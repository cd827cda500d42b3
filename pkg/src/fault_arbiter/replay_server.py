"""
Recorded-response chat-completions endpoint.

Serves POST /v1/chat/completions from a JSONL file of recorded arbiter
reports so the llm backend can run offline. The case is identified by the
"Case ID: <id>" line of the prompt; successive requests for a case cycle
through its recorded responses.

Recording lines take either form:

    {"case_id": "looseness_0003", "responses": ["...", "..."]}
    {"case_id": "looseness_0003", "response": "..."}      (audit-log lines)
"""

import json
import logging
import re
import threading
import time
from collections import defaultdict
from pathlib import Path
from typing import Any, Optional

from fastapi import FastAPI
from pydantic import BaseModel, Field

from fault_arbiter import __version__
from fault_arbiter.exception_handlers import arbiter_error_handler, generic_exception_handler
from fault_arbiter.exceptions import FaultArbiterError, PersistenceError, RecordingNotFoundError


logger = logging.getLogger(__name__)


CASE_ID_RE = re.compile(r"Case ID:\s*(\S+)")


class ChatCompletionRequest(BaseModel):
    """The subset of the chat-completions request the replay endpoint reads."""

    model: str = "replay"
    messages: list[dict[str, Any]] = Field(default_factory=list)
    temperature: Optional[float] = None
    max_tokens: Optional[int] = None
    n: int = 1


def load_recordings(path: Path) -> dict[str, list[str]]:
    """
    Read recorded responses grouped by case id, in file order.

    Raises:
        PersistenceError: If the file is missing or a line is malformed
    """
    recordings: dict[str, list[str]] = defaultdict(list)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise PersistenceError(f"Could not read recordings: {exc}", str(path), exc) from exc

    for number, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
            case_id = str(record["case_id"])
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise PersistenceError(f"Malformed recording on line {number}: {exc}", str(path), exc) from exc
        if "responses" in record:
            recordings[case_id].extend(str(text) for text in record["responses"])
        elif "response" in record:
            recordings[case_id].append(str(record["response"]))

    logger.info(
        f"Loaded recordings for {len(recordings)} cases from {path}",
        extra={"n_cases": len(recordings)},
    )
    return dict(recordings)


def _prompt_text(messages: list[dict[str, Any]]) -> str:
    parts: list[str] = []
    for message in messages:
        content = message.get("content", "")
        if isinstance(content, str):
            parts.append(content)
        else:
            parts.extend(part.get("text", "") for part in content if part.get("type") == "text")
    return "\n".join(parts)


def create_replay_app(recordings: dict[str, list[str]]) -> FastAPI:
    """
    Build the replay application.

    Args:
        recordings: Responses per case id

    Returns:
        FastAPI app exposing /v1/chat/completions and /health
    """
    app = FastAPI(
        title="fault-arbiter replay endpoint",
        version=__version__,
        description="Replays recorded arbiter reports through a chat-completions API",
    )
    app.add_exception_handler(FaultArbiterError, arbiter_error_handler)
    app.add_exception_handler(Exception, generic_exception_handler)

    counters: dict[str, int] = defaultdict(int)
    lock = threading.Lock()

    @app.get("/health", tags=["health"])
    def health_check() -> dict[str, Any]:
        """Liveness check with the number of recorded cases."""
        return {"status": "healthy", "cases": len(recordings)}

    @app.post("/v1/chat/completions", tags=["replay"])
    def chat_completions(payload: ChatCompletionRequest) -> dict[str, Any]:
        """Return the next recorded response for the prompt's case id."""
        match = CASE_ID_RE.search(_prompt_text(payload.messages))
        case_id = match.group(1) if match else None
        responses = recordings.get(case_id or "")
        if not responses:
            raise RecordingNotFoundError(case_id)

        with lock:
            index = counters[case_id] % len(responses)
            counters[case_id] += 1

        logger.debug(f"Replaying response {index} for case '{case_id}'", extra={"case_id": case_id})
        return {
            "id": f"replay-{case_id}-{index}",
            "object": "chat.completion",
            "created": int(time.time()),
            "model": payload.model,
            "choices": [
                {
                    "index": 0,
                    "message": {"role": "assistant", "content": responses[index]},
                    "finish_reason": "stop",
                }
            ],
        }

    return app
