from pathlib import Path
from typing import Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

from fault_arbiter.schemas.enums import (
    BackendKind,
    Decision,
    FaultClass,
    Split,
    VerificationStatus,
)
from fault_arbiter.schemas.feature_schema import FeatureVector


# === Rule Engine ===


class Diagnosis(BaseModel):
    """Preliminary diagnosis (d_rule, c_rule) from the Naive Bayes engine."""

    # log_scores is -inf for classes with a zero prior or zero table probability
    model_config = ConfigDict(frozen=True, ser_json_inf_nan="constants")

    label: FaultClass
    confidence: float = Field(..., ge=0, le=1, description="max posterior")
    classes: list[FaultClass] = Field(..., description="Order of posteriors and log_scores")
    posteriors: list[float] = Field(..., description="Normalized posterior per class")
    log_scores: list[float] = Field(
        ..., description="Unnormalized log posteriors (log prior + log likelihood), used as logits"
    )

    @model_validator(mode="after")
    def validate_consistency(self) -> "Diagnosis":
        if not len(self.classes) == len(self.posteriors) == len(self.log_scores):
            raise ValueError("classes, posteriors and log_scores must have equal length")
        if abs(sum(self.posteriors) - 1.0) > 1e-9:
            raise ValueError("posteriors must sum to 1")
        return self


# === Arbiter ===


class PromptBundle(BaseModel):
    """Everything sent to the arbiter for one case."""

    model_config = ConfigDict(frozen=True)

    system_text: str
    user_text: str
    image_ref: Optional[Path] = Field(None, description="Four-chart PNG panel attached to the prompt")
    case_id: Optional[str] = None


class ArbiterVerdict(BaseModel):
    """Cognitive verdict (d_llm, c_llm) with self-consistency confidence."""

    label: FaultClass
    confidence: float = Field(..., ge=0, le=1, description="Vote share of label among parsed samples")
    rationale: str = ""
    step_reports: dict[str, str] = Field(default_factory=dict)
    raw_responses: list[str] = Field(default_factory=list)
    stated_confidences: list[Optional[float]] = Field(
        default_factory=list, description="Self-reported confidences, audit only"
    )
    votes: dict[FaultClass, int] = Field(default_factory=dict)
    n_requested: int = 1
    n_parsed: int = 1
    backend: BackendKind = BackendKind.ORACLE


class SourceOpinion(BaseModel):
    """One side of the arbitration: a label and its (possibly calibrated) confidence."""

    model_config = ConfigDict(frozen=True)

    label: FaultClass
    confidence: float = Field(..., ge=0, le=1)


class ArbitrationAudit(BaseModel):
    """Evaluated branch conditions of the arbitration policy."""

    model_config = ConfigDict(frozen=True)

    labels_agree: bool
    agreement_meets_theta: bool = Field(..., description="agree and max(c_rule, c_llm) >= theta")
    margin_meets_delta: bool = Field(..., description="c_llm - c_rule >= delta")
    llm_meets_theta: bool = Field(..., description="c_llm >= theta")
    theta: float
    delta: float
    note: str = ""


class ArbitrationOutcome(BaseModel):
    """Agree / Override / Abstain decision with the evidence that produced it."""

    decision: Decision
    final_label: Optional[FaultClass] = None
    final_confidence: Optional[float] = Field(None, ge=0, le=1)
    rule_side: SourceOpinion
    llm_side: Optional[SourceOpinion] = None
    audit: Optional[ArbitrationAudit] = None
    cause: Optional[str] = Field(None, description="Why the arbiter could not be consulted")
    evidence: dict[str, str] = Field(default_factory=dict, description="Manual-review bundle paths")

    @model_validator(mode="after")
    def validate_decision(self) -> "ArbitrationOutcome":
        abstained = self.decision == Decision.ABSTAIN
        if abstained != (self.final_label is None):
            raise ValueError("final_label must be absent exactly when the decision is abstain")
        if abstained != (self.final_confidence is None):
            raise ValueError("final_confidence must be absent exactly when the decision is abstain")
        if self.audit is not None:
            agree = self.audit.agreement_meets_theta
            override = (
                not self.audit.labels_agree
                and self.audit.margin_meets_delta
                and self.audit.llm_meets_theta
            )
            expected = Decision.AGREE if agree else Decision.OVERRIDE if override else Decision.ABSTAIN
            if expected != self.decision:
                raise ValueError(f"audit implies {expected.value}, decision is {self.decision.value}")
        return self


# === Case Records ===


class CaseRecord(BaseModel):
    """Full per-sample trail from features to verified outcome."""

    model_config = ConfigDict(ser_json_inf_nan="constants")

    sample_id: str
    split: Split
    true_label: FaultClass
    features: FeatureVector
    rule: Diagnosis
    verdict: Optional[ArbiterVerdict] = None
    outcome: ArbitrationOutcome
    calibrated_rule_confidence: Optional[float] = None
    calibrated_llm_confidence: Optional[float] = None
    status: VerificationStatus
    panel_path: Optional[Path] = None
    report_path: Optional[Path] = None

    @model_validator(mode="after")
    def validate_status(self) -> "CaseRecord":
        final = self.outcome.final_label
        if final is None:
            expected = VerificationStatus.ABSTAINED
        elif final == self.true_label:
            expected = VerificationStatus.CORRECT
        else:
            expected = VerificationStatus.INCORRECT
        if self.status != expected:
            raise ValueError(f"status {self.status.value} inconsistent with outcome ({expected.value})")
        return self


def verification_status(outcome: ArbitrationOutcome, truth: FaultClass) -> VerificationStatus:
    """Status implied by an outcome and the ground-truth label."""
    if outcome.final_label is None:
        return VerificationStatus.ABSTAINED
    if outcome.final_label == truth:
        return VerificationStatus.CORRECT
    return VerificationStatus.INCORRECT
