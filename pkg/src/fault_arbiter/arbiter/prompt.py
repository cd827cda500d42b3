"""
Expert prompt construction and verdict parsing.

The prompt asks for a four-step analysis and ends with a fixed output
contract. parse_verdict reads that contract back, tolerating case,
whitespace, markdown emphasis and trailing text on the diagnosis line.
"""

import re
from pathlib import Path
from typing import NamedTuple, Optional

from fault_arbiter.exceptions import VerdictParseError
from fault_arbiter.schemas.diagnosis_schema import PromptBundle
from fault_arbiter.schemas.enums import CANONICAL_CLASSES, FaultClass
from fault_arbiter.schemas.feature_schema import FEATURE_NAMES, FEATURE_UNITS, FeatureVector


STEP_HEADINGS: tuple[str, ...] = (
    "Hypothesis Verification",
    "Evidence Synthesis & Cross-Validation",
    "Conflict Arbitration",
    "Final Verdict Formulation",
)

_STEP_TASKS: tuple[str, ...] = (
    "Judge whether the rule-based diagnosis is plausible given the features.",
    "Read the key patterns in the four charts and check them against the numeric features.",
    "State explicitly whether the evidence conflicts with the hypothesis and which evidence misled it.",
    "Give the final diagnosis, your confidence and the reasoning behind it.",
)

SYSTEM_PREAMBLE = (
    "You are a Chief Reliability Engineer with 25 years of experience in vibration analysis "
    "of rotating machinery. You review preliminary diagnoses produced by an automated "
    "rule-based system and either confirm them or overturn them based on the evidence."
)

_PANEL_NOTE = (
    "The attached image is the four-chart diagnostic panel for this case: time waveform "
    "(top left), FFT spectrum (top right), order spectrum (bottom left) and envelope spectrum "
    "(bottom right). Dashed vertical lines mark integer multiples of the shaft frequency."
)
_NO_PANEL_NOTE = "No diagnostic panel is attached for this case; rely on the numeric features."

_ALIASES: dict[str, FaultClass] = {
    "unbalance": FaultClass.IMBALANCE,
    "healthy": FaultClass.NORMAL,
    "bearing_fault": FaultClass.BEARING_DAMAGE,
    "gear_damage": FaultClass.GEAR_FAULT,
}

_DIAGNOSIS_RE = re.compile(
    r"final\s+diagnosis\s*\**\s*[:：]\s*\**\s*(?P<label>[^\n\r]*)", re.IGNORECASE
)
_CONFIDENCE_RE = re.compile(
    r"confidence\s+level\s*\**\s*[:：]\s*\**\s*(?P<value>\d+(?:\.\d+)?)\s*%", re.IGNORECASE
)
_RATIONALE_RE = re.compile(r"rationale\s*\**\s*[:：]\s*\**", re.IGNORECASE)
_LABEL_CUT_RE = re.compile(r"\s+-\s+|[(,;.]")


class ParsedVerdict(NamedTuple):
    label: FaultClass
    stated_confidence: Optional[float]
    rationale: str


# === Prompt ===


def format_feature_lines(features: FeatureVector) -> list[str]:
    """One "* name = value unit" line per model feature, in FEATURE_NAMES order."""
    return [
        f"* {name} = {getattr(features, name):.6g}{FEATURE_UNITS[name]}" for name in FEATURE_NAMES
    ]


def build_prompt(
    features: FeatureVector,
    d_rule: FaultClass,
    c_rule: float,
    panel_image_ref: Optional[Path] = None,
    case_id: Optional[str] = None,
) -> PromptBundle:
    """
    Build the arbitration prompt for one case.

    Args:
        features: Extracted feature vector
        d_rule: Rule-engine label
        c_rule: Rule-engine confidence in [0, 1], shown as a percentage
        panel_image_ref: PNG panel sent alongside the text
        case_id: Identifier echoed in the prompt (used by the replay endpoint)

    Returns:
        PromptBundle with system and user text
    """
    lines: list[str] = []
    if case_id is not None:
        lines += [f"Case ID: {case_id}", ""]
    lines += [
        "Evidence",
        f"Rule-Based Diagnosis: {d_rule.value} ({c_rule * 100:.1f}%)",
        "",
        "Quantitative features:",
        *format_feature_lines(features),
        f"Shaft frequency (1X): {features.shaft_freq:.2f} Hz",
        "",
        _PANEL_NOTE if panel_image_ref is not None else _NO_PANEL_NOTE,
        "",
        "Task: analyse the case strictly step by step.",
        *(
            f"Step {i}: {heading}: {task}"
            for i, (heading, task) in enumerate(zip(STEP_HEADINGS, _STEP_TASKS), start=1)
        ),
        "",
        f"Allowed classes: {', '.join(c.value for c in CANONICAL_CLASSES)}",
        "",
        "End your report with exactly these three lines:",
        "Final Diagnosis: <one allowed class>",
        "Confidence Level: <integer>%",
        "Rationale: <the decisive evidence>",
    ]
    return PromptBundle(
        system_text=SYSTEM_PREAMBLE,
        user_text="\n".join(lines),
        image_ref=panel_image_ref,
        case_id=case_id,
    )


# === Parsing ===


def _normalize(text: str) -> str:
    cleaned = text.strip().strip("*`\"'").lower()
    return re.sub(r"[\s\-]+", "_", cleaned).strip("_")


def match_class(raw: str) -> Optional[FaultClass]:
    """Map free text to a class: exact name first, then earliest substring."""
    head = _normalize(_LABEL_CUT_RE.split(raw, maxsplit=1)[0])
    for fault_class in CANONICAL_CLASSES:
        if head == fault_class.value:
            return fault_class
    if head in _ALIASES:
        return _ALIASES[head]

    whole = _normalize(raw)
    candidates = {c.value: c for c in CANONICAL_CLASSES} | _ALIASES
    hits = [(whole.find(name), name) for name in candidates if name in whole]
    if not hits:
        return None
    return candidates[min(hits)[1]]


def parse_verdict(text: str) -> ParsedVerdict:
    """
    Extract (label, stated confidence, rationale) from an arbiter report.

    The last "Final Diagnosis:" line naming a known class wins, so an echoed
    output template earlier in the text is ignored. The stated confidence is
    informational only.

    Raises:
        VerdictParseError: If no diagnosis line names a known class
    """
    label = None
    for match in reversed(list(_DIAGNOSIS_RE.finditer(text))):
        label = match_class(match.group("label"))
        if label is not None:
            break
    if label is None:
        raise VerdictParseError("No recognizable 'Final Diagnosis' line", excerpt=text)

    stated = None
    confidences = _CONFIDENCE_RE.findall(text)
    if confidences:
        stated = min(float(confidences[-1]) / 100.0, 1.0)

    rationale = ""
    rationale_marks = list(_RATIONALE_RE.finditer(text))
    if rationale_marks:
        rationale = text[rationale_marks[-1].end() :].strip()

    return ParsedVerdict(label=label, stated_confidence=stated, rationale=rationale)


def extract_step_reports(text: str) -> dict[str, str]:
    """Text under each "Step N: <heading>" found in a report, keyed by heading."""
    reports: dict[str, str] = {}
    for i, heading in enumerate(STEP_HEADINGS, start=1):
        pattern = re.compile(
            rf"step\s*{i}\s*[:.]?\s*{re.escape(heading)}\s*\**\s*[:：]?\s*(?P<body>.*?)(?=step\s*\d\s*[:.]|\Z)",
            re.IGNORECASE | re.DOTALL,
        )
        match = pattern.search(text)
        if match:
            reports[heading] = match.group("body").strip()
    return reports
