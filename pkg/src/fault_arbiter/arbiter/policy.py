"""
Selective arbitration policy.

    Agree     if d_rule == d_llm and max(c_rule, c_llm) >= theta
              -> (d_rule, max(c_rule, c_llm))
    Override  if d_rule != d_llm and c_llm - c_rule >= delta and c_llm >= theta
              -> (d_llm, c_llm)
    Abstain   otherwise (routed to manual review)
"""

import math

from fault_arbiter.exceptions import InputValidationError
from fault_arbiter.schemas.diagnosis_schema import (
    ArbitrationAudit,
    ArbitrationOutcome,
    SourceOpinion,
)
from fault_arbiter.schemas.enums import Decision, FaultClass


AGREE_NOTE = "Agree confidence is the larger of the two inputs as given; it is not re-calibrated"


def _check_unit(name: str, value: float) -> None:
    if not (math.isfinite(value) and 0.0 <= value <= 1.0):
        raise InputValidationError(f"{name} must lie in [0, 1], got {value}", field=name)


def arbitrate(
    d_rule: FaultClass,
    c_rule: float,
    d_llm: FaultClass,
    c_llm: float,
    theta: float,
    delta: float,
) -> ArbitrationOutcome:
    """
    Decide Agree / Override / Abstain from the two opinions.

    Args:
        d_rule, c_rule: Rule-engine label and (calibrated) confidence
        d_llm, c_llm: Arbiter label and (calibrated) confidence
        theta: Abstention threshold
        delta: Conflict confidence boundary

    Returns:
        ArbitrationOutcome with the evaluated conditions in its audit

    Raises:
        InputValidationError: If a confidence or threshold is outside [0, 1]
    """
    for name, value in (("c_rule", c_rule), ("c_llm", c_llm), ("theta", theta), ("delta", delta)):
        _check_unit(name, value)

    agree = d_rule == d_llm
    audit = ArbitrationAudit(
        labels_agree=agree,
        agreement_meets_theta=agree and max(c_rule, c_llm) >= theta,
        margin_meets_delta=c_llm - c_rule >= delta,
        llm_meets_theta=c_llm >= theta,
        theta=theta,
        delta=delta,
        note=AGREE_NOTE if agree else "",
    )

    if audit.agreement_meets_theta:
        decision, label, confidence = Decision.AGREE, d_rule, max(c_rule, c_llm)
    elif not agree and audit.margin_meets_delta and audit.llm_meets_theta:
        decision, label, confidence = Decision.OVERRIDE, d_llm, c_llm
    else:
        decision, label, confidence = Decision.ABSTAIN, None, None

    return ArbitrationOutcome(
        decision=decision,
        final_label=label,
        final_confidence=confidence,
        rule_side=SourceOpinion(label=d_rule, confidence=c_rule),
        llm_side=SourceOpinion(label=d_llm, confidence=c_llm),
        audit=audit,
    )


def abstain_on_failure(d_rule: FaultClass, c_rule: float, cause: str) -> ArbitrationOutcome:
    """Abstain outcome for a case whose arbiter could not be consulted."""
    return ArbitrationOutcome(
        decision=Decision.ABSTAIN,
        rule_side=SourceOpinion(label=d_rule, confidence=c_rule),
        cause=cause,
    )
