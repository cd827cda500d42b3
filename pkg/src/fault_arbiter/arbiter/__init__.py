"""Cognitive arbitration: prompts, backends, self-consistency voting and the decision policy."""

from fault_arbiter.arbiter.backends import (
    ArbiterBackend,
    ChatCompletionsBackend,
    OracleBackend,
    RecordedBackend,
)
from fault_arbiter.arbiter.oracle import DEFAULT_NORMAL_BASELINE, NormalBaseline, oracle_arbiter
from fault_arbiter.arbiter.policy import abstain_on_failure, arbitrate
from fault_arbiter.arbiter.prompt import build_prompt, parse_verdict
from fault_arbiter.arbiter.verdict import arbiter_verdict

__all__ = [
    "ArbiterBackend",
    "ChatCompletionsBackend",
    "DEFAULT_NORMAL_BASELINE",
    "NormalBaseline",
    "OracleBackend",
    "RecordedBackend",
    "abstain_on_failure",
    "arbiter_verdict",
    "arbitrate",
    "build_prompt",
    "oracle_arbiter",
    "parse_verdict",
]
