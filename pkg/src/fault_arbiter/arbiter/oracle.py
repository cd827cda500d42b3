"""
Deterministic expert rule table used as the offline arbiter.

Rules are evaluated in order and the first match wins:

1. ratio_2x_1x > 1.3                                         -> misalignment
2. 0.5 <= ratio_2x_1x <= 1.3 and harmonic_count >= 5         -> looseness
3. env_kurtosis > 4 and env_peak_freq within 15% of 3.58 f_s  -> bearing_damage
4. dominant_freq within 10% of 23 f_s                         -> gear_fault
5. spectral_centroid above 1000 Hz and the normal band,
   kurtosis < 4 and ratio_2x_1x < 0.3                         -> cavitation
6. ratio_2x_1x < 0.2, harmonic_count <= 2, kurtosis < 3.5
   and rms above the normal band                              -> imbalance
7. otherwise                                                  -> normal

Confidence is 0.85, dropping to 0.6 when any condition of the winning rule
clears its threshold by less than 10% (relative).
"""

import logging
from collections.abc import Callable, Sequence
from typing import NamedTuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from fault_arbiter.exceptions import InsufficientDataError
from fault_arbiter.schemas.enums import FaultClass
from fault_arbiter.schemas.feature_schema import FeatureVector


logger = logging.getLogger(__name__)


CONFIDENT = 0.85
MARGINAL = 0.6
MARGIN_FRACTION = 0.1

BEARING_DEFECT_ORDER = 3.58
GEAR_MESH_ORDER = 23
CAVITATION_MIN_CENTROID_HZ = 1000.0


class NormalBaseline(BaseModel):
    """Healthy-machine rms and spectral-centroid bands."""

    model_config = ConfigDict(frozen=True)

    rms_band: tuple[float, float]
    centroid_band: tuple[float, float]
    n_samples: int = Field(0, ge=0, description="Normal recordings the bands were fitted on (0 = default)")

    @classmethod
    def fit(cls, normal_features: Sequence[FeatureVector]) -> "NormalBaseline":
        """
        Bands of mean +/- max(4 sigma, 5% of mean) over normal-class features.

        Raises:
            InsufficientDataError: With fewer than two normal recordings
        """
        if len(normal_features) < 2:
            raise InsufficientDataError(
                "Normal baseline needs at least 2 normal-class recordings",
                counts={FaultClass.NORMAL.value: len(normal_features)},
                required=2,
            )

        def band(values: np.ndarray) -> tuple[float, float]:
            mean = float(values.mean())
            half = max(4.0 * float(values.std()), 0.05 * abs(mean))
            return mean - half, mean + half

        return cls(
            rms_band=band(np.array([f.rms for f in normal_features])),
            centroid_band=band(np.array([f.spectral_centroid for f in normal_features])),
            n_samples=len(normal_features),
        )


# Bands of the default synthetic normal class (A = 1, noise_std = 0.1, 10 kHz, 4096-point frames)
DEFAULT_NORMAL_BASELINE = NormalBaseline(rms_band=(0.678, 0.750), centroid_band=(1840.0, 2030.0))


class RuleCondition(NamedTuple):
    """One evaluated predicate with its relative margin (negative when it fails)."""

    description: str
    holds: bool
    margin: float


class OracleVerdict(NamedTuple):
    label: FaultClass
    confidence: float
    rationale: str
    rule_index: int
    conditions: list[RuleCondition]


# === Predicates ===


def _above(name: str, value: float, threshold: float) -> RuleCondition:
    margin = (value - threshold) / abs(threshold)
    return RuleCondition(f"{name} = {value:.4g} > {threshold:.4g}", value > threshold, margin)


def _below(name: str, value: float, threshold: float) -> RuleCondition:
    margin = (threshold - value) / abs(threshold)
    return RuleCondition(f"{name} = {value:.4g} < {threshold:.4g}", value < threshold, margin)


def _at_least(name: str, value: float, threshold: float) -> RuleCondition:
    margin = (value - threshold) / abs(threshold)
    return RuleCondition(f"{name} = {value:.4g} >= {threshold:.4g}", value >= threshold, margin)


def _at_most(name: str, value: float, threshold: float) -> RuleCondition:
    margin = (threshold - value) / abs(threshold)
    return RuleCondition(f"{name} = {value:.4g} <= {threshold:.4g}", value <= threshold, margin)


def _within(name: str, value: float, target: float, tolerance: float) -> RuleCondition:
    allowed = tolerance * target
    deviation = abs(value - target)
    return RuleCondition(
        f"{name} = {value:.4g} within {tolerance:.0%} of {target:.4g}",
        deviation <= allowed,
        (allowed - deviation) / allowed,
    )


def _rules(
    f: FeatureVector, baseline: NormalBaseline
) -> list[tuple[FaultClass, Callable[[], list[RuleCondition]]]]:
    centroid_floor = max(CAVITATION_MIN_CENTROID_HZ, baseline.centroid_band[1])
    return [
        (FaultClass.MISALIGNMENT, lambda: [_above("2X/1X", f.ratio_2x_1x, 1.3)]),
        (
            FaultClass.LOOSENESS,
            lambda: [
                _at_least("2X/1X", f.ratio_2x_1x, 0.5),
                _at_most("2X/1X", f.ratio_2x_1x, 1.3),
                _at_least("harmonic count", f.harmonic_count, 5),
            ],
        ),
        (
            FaultClass.BEARING_DAMAGE,
            lambda: [
                _above("envelope kurtosis", f.env_kurtosis, 4.0),
                _within("envelope peak", f.env_peak_freq, BEARING_DEFECT_ORDER * f.shaft_freq, 0.15),
            ],
        ),
        (
            FaultClass.GEAR_FAULT,
            lambda: [_within("dominant frequency", f.dominant_freq, GEAR_MESH_ORDER * f.shaft_freq, 0.10)],
        ),
        (
            FaultClass.CAVITATION,
            lambda: [
                _above("spectral centroid", f.spectral_centroid, centroid_floor),
                _below("kurtosis", f.kurtosis, 4.0),
                _below("2X/1X", f.ratio_2x_1x, 0.3),
            ],
        ),
        (
            FaultClass.IMBALANCE,
            lambda: [
                _below("2X/1X", f.ratio_2x_1x, 0.2),
                _at_most("harmonic count", f.harmonic_count, 2),
                _below("kurtosis", f.kurtosis, 3.5),
                _above("rms", f.rms, baseline.rms_band[1]),
            ],
        ),
    ]


# === Oracle ===


def oracle_arbiter(
    f: FeatureVector, baseline: NormalBaseline = DEFAULT_NORMAL_BASELINE
) -> OracleVerdict:
    """
    Apply the rule table to one feature vector.

    Args:
        f: Feature vector (shaft_freq sets the defect and mesh targets)
        baseline: Healthy rms and centroid bands

    Returns:
        OracleVerdict with the matched rule (1-based, 7 = fall-through) and
        its evaluated conditions
    """
    for index, (label, conditions_of) in enumerate(_rules(f, baseline), start=1):
        conditions = conditions_of()
        if all(c.holds for c in conditions):
            marginal = [c for c in conditions if c.margin < MARGIN_FRACTION]
            confidence = MARGINAL if marginal else CONFIDENT
            rationale = f"Rule {index} ({label.value}): " + "; ".join(c.description for c in conditions)
            if marginal:
                rationale += ". Close to threshold: " + "; ".join(c.description for c in marginal)
            return OracleVerdict(label, confidence, rationale, index, conditions)

    return OracleVerdict(
        FaultClass.NORMAL,
        CONFIDENT,
        "Rule 7 (normal): no fault signature matched",
        7,
        [],
    )


def format_oracle_report(verdict: OracleVerdict, d_rule: FaultClass, c_rule: float) -> str:
    """Render an oracle verdict in the same report layout the prompt asks an LLM for."""
    conflict = "No conflict" if verdict.label == d_rule else "Conflict detected"
    return "\n".join(
        [
            f"Step 1: Hypothesis Verification: Rule-based hypothesis {d_rule.value} at {c_rule:.1%}.",
            f"Step 2: Evidence Synthesis & Cross-Validation: {verdict.rationale}.",
            f"Step 3: Conflict Arbitration: {conflict} with the rule-based hypothesis.",
            "Step 4: Final Verdict Formulation:",
            f"Final Diagnosis: {verdict.label.value}",
            f"Confidence Level: {round(verdict.confidence * 100)}%",
            f"Rationale: {verdict.rationale}",
        ]
    )
