"""
Tests for the rule-table arbiter (arbiter/oracle.py).

Feature fixtures follow three documented field cases: a looseness case the
rule engine mistook for a gear fault, a misalignment case with a 1.87:1
2X/1X ratio, and a bearing case with high kurtosis and crest factor.
"""

import pytest

from fault_arbiter.arbiter.oracle import (
    CONFIDENT,
    DEFAULT_NORMAL_BASELINE,
    MARGINAL,
    NormalBaseline,
    format_oracle_report,
    oracle_arbiter,
)
from fault_arbiter.arbiter.prompt import parse_verdict
from fault_arbiter.exceptions import InsufficientDataError
from fault_arbiter.schemas.enums import FaultClass


class TestFieldCases:
    """Test the documented field cases."""

    def test_looseness_case(self, make_features):
        features = make_features(ratio_2x_1x=0.716, a2x=0.716, harmonic_count=10)

        verdict = oracle_arbiter(features)

        assert verdict.label == FaultClass.LOOSENESS
        assert verdict.confidence == 0.85
        assert verdict.rule_index == 2

    def test_misalignment_case(self, make_features):
        features = make_features(ratio_2x_1x=1.87, a2x=1.87, crest_factor=4.2)

        verdict = oracle_arbiter(features)

        assert verdict.label == FaultClass.MISALIGNMENT
        assert verdict.confidence == 0.85

    def test_bearing_case(self, make_features):
        features = make_features(
            kurtosis=10.95, crest_factor=5.40, env_kurtosis=10.95, env_peak_freq=3.58 * 60.0
        )

        verdict = oracle_arbiter(features)

        assert verdict.label == FaultClass.BEARING_DAMAGE
        assert verdict.confidence == 0.85


class TestRuleTable:
    """Test each rule and the first-match order."""

    @pytest.mark.parametrize(
        "overrides, label, rule",
        [
            ({"dominant_freq": 23 * 60.0}, FaultClass.GEAR_FAULT, 4),
            ({"spectral_centroid": 2500.0, "kurtosis": 3.0}, FaultClass.CAVITATION, 5),
            ({"rms": 2.0, "a1x": 2.8}, FaultClass.IMBALANCE, 6),
            ({}, FaultClass.NORMAL, 7),
        ],
    )
    def test_rules(self, make_features, overrides, label, rule):
        verdict = oracle_arbiter(make_features(**overrides))

        assert verdict.label == label
        assert verdict.rule_index == rule
        assert verdict.confidence == CONFIDENT

    def test_first_match_wins(self, make_features):
        """Test that misalignment is preferred over a simultaneous bearing signature."""
        features = make_features(ratio_2x_1x=1.87, env_kurtosis=10.0, env_peak_freq=3.58 * 60.0)

        assert oracle_arbiter(features).label == FaultClass.MISALIGNMENT

    def test_marginal_match(self, make_features):
        """Test that a condition within 10% of its threshold lowers the confidence."""
        verdict = oracle_arbiter(make_features(ratio_2x_1x=1.35))

        assert verdict.label == FaultClass.MISALIGNMENT
        assert verdict.confidence == MARGINAL
        assert "Close to threshold" in verdict.rationale

    def test_defect_frequency_scales_with_speed(self, make_features):
        features = make_features(shaft_freq=50.0, env_kurtosis=8.0, env_peak_freq=3.58 * 50.0)

        assert oracle_arbiter(features).label == FaultClass.BEARING_DAMAGE
        assert oracle_arbiter(features.model_copy(update={"shaft_freq": 70.0})).label != FaultClass.BEARING_DAMAGE

    def test_baseline_controls_imbalance(self, make_features):
        features = make_features(rms=0.9)
        wide = NormalBaseline(rms_band=(0.5, 1.0), centroid_band=(1800.0, 2000.0))

        assert oracle_arbiter(features).label == FaultClass.IMBALANCE
        assert oracle_arbiter(features, wide).label == FaultClass.NORMAL


class TestNormalBaseline:
    """Test fitting the healthy bands."""

    def test_fit(self, make_features):
        baseline = NormalBaseline.fit([make_features(rms=0.70), make_features(rms=0.72)])

        assert baseline.rms_band == pytest.approx((0.67, 0.75))
        assert baseline.n_samples == 2

    def test_needs_two_recordings(self, make_features):
        with pytest.raises(InsufficientDataError):
            NormalBaseline.fit([make_features()])

    def test_default_baseline_covers_healthy_fixture(self, make_features):
        low, high = DEFAULT_NORMAL_BASELINE.rms_band

        assert low < make_features().rms < high


class TestOracleReport:
    """Test the report text rendered for the oracle."""

    def test_report_parses_back(self, make_features):
        verdict = oracle_arbiter(make_features(ratio_2x_1x=0.716, harmonic_count=10))

        report = format_oracle_report(verdict, FaultClass.GEAR_FAULT, 0.466)
        parsed = parse_verdict(report)

        assert parsed.label == FaultClass.LOOSENESS
        assert parsed.stated_confidence == pytest.approx(0.85)
        assert "Conflict detected" in report
