"""Self-consistency verdicts: K reports, parsed and voted."""

import logging
from collections import Counter
from typing import Optional

import numpy as np

from fault_arbiter.arbiter.backends import ArbiterBackend, OracleBackend
from fault_arbiter.arbiter.oracle import format_oracle_report
from fault_arbiter.arbiter.prompt import ParsedVerdict, extract_step_reports, parse_verdict
from fault_arbiter.exceptions import (
    ArbiterUnavailableError,
    InputValidationError,
    VerdictParseError,
)
from fault_arbiter.schemas.diagnosis_schema import ArbiterVerdict, PromptBundle
from fault_arbiter.schemas.enums import CANONICAL_CLASSES, BackendKind, FaultClass
from fault_arbiter.schemas.feature_schema import FeatureVector
from fault_arbiter.schemas.settings_schema import ArbitrationConfig


logger = logging.getLogger(__name__)


def plurality(parsed: list[ParsedVerdict]) -> tuple[FaultClass, int]:
    """
    Plurality label and its vote count.

    Ties go to the higher mean stated confidence (missing values ignored),
    then to canonical class order.
    """
    votes = Counter(p.label for p in parsed)
    top = max(votes.values())
    tied = [label for label in CANONICAL_CLASSES if votes[label] == top]
    if len(tied) == 1:
        return tied[0], top

    def mean_stated(label: FaultClass) -> float:
        stated = [p.stated_confidence for p in parsed if p.label == label and p.stated_confidence is not None]
        return float(np.mean(stated)) if stated else -1.0

    # max keeps the first of equal keys, i.e. canonical order
    return max(tied, key=mean_stated), top


def verdict_from_texts(
    texts: list[str], n_requested: int, backend: BackendKind = BackendKind.LLM
) -> ArbiterVerdict:
    """
    Parse and vote K raw reports.

    Raises:
        ArbiterUnavailableError: If no report contains a recognizable diagnosis
    """
    parsed: list[ParsedVerdict] = []
    kept: list[str] = []
    for text in texts:
        try:
            parsed.append(parse_verdict(text))
            kept.append(text)
        except VerdictParseError as exc:
            logger.warning(f"Dropping unparseable arbiter sample: {exc.message}")

    if not parsed:
        raise ArbiterUnavailableError(
            message=f"None of {len(texts)} arbiter samples contained a recognizable diagnosis",
            reason="unparseable",
            details={"n_requested": n_requested, "n_received": len(texts)},
        )

    label, count = plurality(parsed)
    winner = next(i for i, p in enumerate(parsed) if p.label == label)
    return ArbiterVerdict(
        label=label,
        confidence=count / len(parsed),
        rationale=parsed[winner].rationale,
        step_reports=extract_step_reports(kept[winner]),
        raw_responses=list(texts),
        stated_confidences=[p.stated_confidence for p in parsed],
        votes=dict(Counter(p.label for p in parsed)),
        n_requested=n_requested,
        n_parsed=len(parsed),
        backend=backend,
    )


def arbiter_verdict(
    features: FeatureVector,
    bundle: Optional[PromptBundle],
    d_rule: FaultClass,
    c_rule: float,
    cfg: ArbitrationConfig,
    backend: ArbiterBackend | OracleBackend,
) -> ArbiterVerdict:
    """
    Cognitive verdict (d_llm, c_llm) for one case.

    For text backends, cfg.k_samples reports are requested and c_llm is the
    vote share of the plurality label among parsed reports; stated
    confidences are kept for audit only. The oracle backend is deterministic:
    one effective sample whose confidence is the rule-margin confidence.

    Raises:
        ArbiterUnavailableError: On transport failure after retries, or when
            no sample parses
    """
    if isinstance(backend, OracleBackend):
        judged = backend.judge(features)
        report = format_oracle_report(judged, d_rule, c_rule)
        return ArbiterVerdict(
            label=judged.label,
            confidence=judged.confidence,
            rationale=judged.rationale,
            step_reports=extract_step_reports(report),
            raw_responses=[report],
            stated_confidences=[judged.confidence],
            votes={judged.label: 1},
            n_requested=1,
            n_parsed=1,
            backend=BackendKind.ORACLE,
        )

    if bundle is None:
        raise InputValidationError("Text backends need a prompt bundle", field="bundle")
    texts = backend.complete(bundle, cfg.k_samples)
    return verdict_from_texts(texts, cfg.k_samples, backend.kind)
