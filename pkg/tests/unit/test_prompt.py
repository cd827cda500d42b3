"""
Tests for prompt construction and verdict parsing (arbiter/prompt.py).
"""

from pathlib import Path

import pytest

from fault_arbiter.arbiter.prompt import (
    STEP_HEADINGS,
    SYSTEM_PREAMBLE,
    build_prompt,
    extract_step_reports,
    match_class,
    parse_verdict,
)
from fault_arbiter.exceptions import VerdictParseError
from fault_arbiter.schemas.enums import FaultClass


class TestBuildPrompt:
    """Test the arbitration prompt."""

    def test_contains_step_headings(self, make_features):
        bundle = build_prompt(make_features(), FaultClass.NORMAL, 0.9)

        for heading in STEP_HEADINGS:
            assert heading in bundle.user_text
        assert bundle.system_text == SYSTEM_PREAMBLE

    def test_hypothesis_line(self, make_features):
        """Test that the rule diagnosis is shown with its percentage."""
        bundle = build_prompt(make_features(), FaultClass.GEAR_FAULT, 0.466)

        hypothesis = next(line for line in bundle.user_text.splitlines() if line.startswith("Rule-Based"))
        assert "gear_fault" in hypothesis
        assert "46.6%" in hypothesis

    def test_thirteen_feature_lines(self, make_features):
        bundle = build_prompt(make_features(), FaultClass.NORMAL, 0.9)

        feature_lines = [line for line in bundle.user_text.splitlines() if line.startswith("* ")]
        assert len(feature_lines) == 13
        assert feature_lines[0] == "* rms = 0.714"

    def test_case_id_and_panel(self, make_features):
        bundle = build_prompt(
            make_features(), FaultClass.NORMAL, 0.9, Path("panel.png"), case_id="normal_0004"
        )

        assert bundle.user_text.startswith("Case ID: normal_0004")
        assert bundle.image_ref == Path("panel.png")
        assert "attached image" in bundle.user_text

    def test_without_panel(self, make_features):
        bundle = build_prompt(make_features(), FaultClass.NORMAL, 0.9)

        assert bundle.image_ref is None
        assert "No diagnostic panel" in bundle.user_text


class TestParseVerdict:
    """Test tolerant verdict parsing."""

    @pytest.mark.parametrize(
        "text, label, stated",
        [
            ("Final Diagnosis: Looseness - Confidence Level: 85%", FaultClass.LOOSENESS, 0.85),
            ("final diagnosis: MISALIGNMENT\nConfidence Level: 85 %", FaultClass.MISALIGNMENT, 0.85),
            ("**Final Diagnosis:** Bearing Damage\n**Confidence Level:** 90%", FaultClass.BEARING_DAMAGE, 0.9),
            ("Final Diagnosis: Unbalance (1X dominant)", FaultClass.IMBALANCE, None),
            ("Final Diagnosis: gear-fault.", FaultClass.GEAR_FAULT, None),
        ],
    )
    def test_formats(self, text, label, stated):
        parsed = parse_verdict(text)

        assert parsed.label == label
        assert parsed.stated_confidence == (pytest.approx(stated) if stated is not None else None)

    def test_unrecognizable(self):
        with pytest.raises(VerdictParseError) as exc:
            parse_verdict("I cannot determine the fault.")

        assert exc.value.details["excerpt"] == "I cannot determine the fault."

    def test_echoed_template_ignored(self):
        """Test that the last diagnosis line naming a class wins."""
        text = (
            "Final Diagnosis: <one allowed class>\n"
            "Confidence Level: <integer>%\n"
            "...\n"
            "Final Diagnosis: cavitation\n"
            "Confidence Level: 70%\n"
            "Rationale: broadband energy between 1 and 4 kHz"
        )

        parsed = parse_verdict(text)

        assert parsed.label == FaultClass.CAVITATION
        assert parsed.stated_confidence == pytest.approx(0.7)
        assert parsed.rationale == "broadband energy between 1 and 4 kHz"

    def test_full_report(self, bearing_report):
        parsed = parse_verdict(bearing_report)

        assert parsed.label == FaultClass.BEARING_DAMAGE
        assert parsed.stated_confidence == pytest.approx(0.9)
        assert parsed.rationale.startswith("Periodic impacts")


class TestHelpers:
    """Test class matching and step extraction."""

    @pytest.mark.parametrize(
        "raw, expected",
        [
            ("normal", FaultClass.NORMAL),
            ("  Healthy ", FaultClass.NORMAL),
            ("likely misalignment of the coupling", FaultClass.MISALIGNMENT),
            ("something else", None),
        ],
    )
    def test_match_class(self, raw, expected):
        assert match_class(raw) == expected

    def test_extract_step_reports(self, bearing_report):
        reports = extract_step_reports(bearing_report)

        assert list(reports) == list(STEP_HEADINGS)
        assert reports["Hypothesis Verification"] == "The rule engine suggests normal."
        assert "Final Diagnosis: Bearing Damage" in reports["Final Verdict Formulation"]
