"""Markdown, CSV and SVG reports built from evaluation results."""

import logging
from pathlib import Path
from typing import Optional

import pandas as pd

from fault_arbiter.arbiter.prompt import format_feature_lines
from fault_arbiter.chart_render import render_reliability_svg, render_risk_coverage_svg
from fault_arbiter.schemas.diagnosis_schema import CaseRecord
from fault_arbiter.schemas.report_schema import (
    ComparisonReport,
    EvalReport,
    EvaluationSummary,
    MetricSummary,
    SweepResult,
)
from fault_arbiter.storage import save_json, write_table, write_text


logger = logging.getLogger(__name__)


# (column header, EvalReport attribute, shown as percent)
COMPARISON_COLUMNS: tuple[tuple[str, str, bool], ...] = (
    ("Accuracy (%)", "accuracy", True),
    ("Full accuracy (%)", "full_accuracy", True),
    ("Coverage (%)", "coverage", True),
    ("ECE", "ece", False),
    ("Adaptive ECE", "adaptive_ece", False),
    ("NLL", "nll", False),
    ("Brier", "brier", False),
    ("AURC", "aurc", False),
    ("AUACC", "auacc", False),
)


def system_slug(system: str) -> str:
    return system.lower().replace(" ", "_")


def format_value(value: float, percent: bool) -> str:
    return f"{100 * value:.1f}" if percent else f"{value:.3f}"


def format_summary(summary: MetricSummary, percent: bool) -> str:
    """Mean and standard deviation, e.g. "95.7 ± 0.8"."""
    scale, digits = (100.0, 1) if percent else (1.0, 3)
    return f"{scale * summary.mean:.{digits}f} ± {scale * summary.std:.{digits}f}"


def _markdown_table(frame: pd.DataFrame) -> str:
    header = "| " + " | ".join(str(c) for c in frame.columns) + " |"
    rule = "|" + "|".join("---" for _ in frame.columns) + "|"
    body = ["| " + " | ".join(str(v) for v in row) + " |" for row in frame.itertuples(index=False)]
    return "\n".join([header, rule, *body])


# === Single Run ===


def comparison_frame(evaluation: EvaluationSummary, external_rows: tuple[str, ...] = ("SVM", "1D-CNN")) -> pd.DataFrame:
    """One row per system plus labeled empty rows for externally reported baselines."""
    rows = [
        {"System": report.system, **{h: format_value(getattr(report, a), p) for h, a, p in COMPARISON_COLUMNS}}
        for report in evaluation.reports
    ]
    rows += [{"System": name, **{h: "" for h, _, _ in COMPARISON_COLUMNS}} for name in external_rows]
    return pd.DataFrame(rows, columns=["System", *(h for h, _, _ in COMPARISON_COLUMNS)])


def write_comparison_table(evaluation: EvaluationSummary, path: Path) -> Path:
    return write_table(comparison_frame(evaluation), path)


def coverage_frame(reports: list[EvalReport]) -> pd.DataFrame:
    return pd.DataFrame(
        [
            {
                "system": report.system,
                "threshold": row.threshold,
                "coverage": row.coverage,
                "risk": row.risk,
                "count": row.count,
            }
            for report in reports
            for row in report.coverage_table
        ],
        columns=["system", "threshold", "coverage", "risk", "count"],
    )


def reliability_frame(report: EvalReport) -> pd.DataFrame:
    return pd.DataFrame(
        [b.model_dump() for b in report.reliability],
        columns=["lower", "upper", "count", "mean_confidence", "accuracy"],
    )


def risk_coverage_frame(report: EvalReport) -> pd.DataFrame:
    return pd.DataFrame(report.risk_coverage, columns=["coverage", "risk"])


def sweep_frame(result: SweepResult) -> pd.DataFrame:
    return pd.DataFrame(
        [row.model_dump() for row in result.rows],
        columns=["theta", "delta", "coverage", "accuracy", "aurc", "auacc", "feasible"],
    )


def write_sweep_table(result: SweepResult, path: Path) -> Path:
    return write_table(sweep_frame(result), path)


def render_markdown(evaluation: EvaluationSummary, sweep: Optional[SweepResult] = None) -> str:
    """Run summary: comparison table, coverage thresholds, per-class metrics and the sweep choice."""
    lines = [
        "# Fault diagnosis evaluation",
        "",
        f"- Seed: {evaluation.seed}",
        f"- Arbiter backend: {evaluation.backend}",
        f"- Test cases: {evaluation.n_test}",
        "",
        "## Comparison (test split)",
        "",
        _markdown_table(comparison_frame(evaluation)),
        "",
        "Accuracy, ECE, NLL, Brier and the risk-coverage areas are computed over answered cases; "
        "full accuracy counts abstentions as errors.",
        "",
        "## Coverage at confidence thresholds",
        "",
        _markdown_table(coverage_frame(evaluation.reports)),
        "",
        "![Reliability](reliability.svg)",
        "",
        "![Risk-coverage](risk_coverage.svg)",
    ]
    for report in evaluation.reports:
        per_class = pd.DataFrame(
            [
                {
                    "class": m.label.value,
                    "precision": f"{m.precision:.3f}",
                    "recall": f"{m.recall:.3f}",
                    "f1": f"{m.f1:.3f}",
                    "support": m.support,
                }
                for m in report.per_class
            ],
            columns=["class", "precision", "recall", "f1", "support"],
        )
        lines += ["", f"## Per-class metrics: {report.system}", "", _markdown_table(per_class)]
    if sweep is not None:
        status = "met" if sweep.constraint_met else "not met"
        lines += [
            "",
            "## Threshold sweep (validation split)",
            "",
            f"Selected theta = {sweep.best_theta}, delta = {sweep.best_delta} "
            f"(minimum coverage {sweep.min_coverage}: {status}).",
        ]
    return "\n".join(lines) + "\n"


def write_report(
    evaluation: EvaluationSummary, report_dir: Path, sweep: Optional[SweepResult] = None
) -> Path:
    """
    Write report.md, the two SVG plots and the per-system CSVs.

    Returns:
        Path of report.md
    """
    for report in evaluation.reports:
        slug = system_slug(report.system)
        write_table(reliability_frame(report), report_dir / f"reliability_{slug}.csv")
        write_table(risk_coverage_frame(report), report_dir / f"risk_coverage_{slug}.csv")
    write_table(coverage_frame(evaluation.reports), report_dir / "coverage_thresholds.csv")

    write_text(
        render_reliability_svg({r.system: r.reliability for r in evaluation.reports}),
        report_dir / "reliability.svg",
    )
    write_text(
        render_risk_coverage_svg({r.system: r.risk_coverage for r in evaluation.reports}),
        report_dir / "risk_coverage.svg",
    )
    path = write_text(render_markdown(evaluation, sweep), report_dir / "report.md")
    logger.info(f"Report written to {path}", extra={"report_dir": str(report_dir)})
    return path


# === Experiment ===


def experiment_frame(comparison: ComparisonReport) -> pd.DataFrame:
    """Mean ± std per system and metric, with empty external rows."""
    rows = [
        {
            "System": summary.system,
            **{h: format_summary(summary.metrics[a], p) for h, a, p in COMPARISON_COLUMNS if a in summary.metrics},
        }
        for summary in comparison.systems
    ]
    rows += [{"System": name} for name in comparison.external_rows]
    return pd.DataFrame(rows, columns=["System", *(h for h, _, _ in COMPARISON_COLUMNS)]).fillna("")


def render_experiment_markdown(comparison: ComparisonReport) -> str:
    seeds = comparison.seeds
    lines = [
        "# Repeated experiment",
        "",
        f"- Seeds: {seeds[0]}..{seeds[-1]} ({len(seeds)} repeats)",
        f"- Arbiter backend: {comparison.backend}",
        "",
        _markdown_table(experiment_frame(comparison)),
    ]
    checks = comparison.acceptance
    if checks is not None:

        def mark(passed: bool) -> str:
            return "pass" if passed else "FAIL"

        ratio = f"{checks.ece_ratio:.3f}" if checks.ece_ratio is not None else "n/a"
        gap = f"{checks.max_calibration_gap:.3f}" if checks.max_calibration_gap is not None else "n/a"
        lines += [
            "",
            "## Checks",
            "",
            f"- Accuracy uplift over Baseline-NB: {checks.accuracy_uplift_pts:.1f} pts "
            f"({mark(checks.accuracy_uplift_pass)})",
            f"- Calibrated / uncalibrated ECE: {ratio} ({mark(checks.ece_halving_pass)})",
            f"- Max reliability gap after calibration: {gap} ({mark(checks.calibration_gap_pass)})",
            f"- AURC below Baseline-NB: {mark(checks.aurc_direction_pass)}",
            f"- AURC + AUACC = 1 for every system: {mark(checks.aurc_identity_pass)}",
        ]
    return "\n".join(lines) + "\n"


def write_experiment(comparison: ComparisonReport, out_dir: Path) -> Path:
    """Write comparison.json, comparison.csv and comparison.md under out_dir."""
    save_json(comparison, out_dir / "comparison.json")
    write_table(experiment_frame(comparison), out_dir / "comparison.csv")
    path = write_text(render_experiment_markdown(comparison), out_dir / "comparison.md")
    logger.info(f"Experiment comparison written to {out_dir}", extra={"repeats": len(comparison.seeds)})
    return path


# === Case Reports ===


def format_case_report(record: CaseRecord) -> str:
    """Manual-review report for one case: evidence, both opinions and the decision audit."""
    outcome = record.outcome
    lines = [
        f"# Case {record.sample_id}",
        "",
        f"- Split: {record.split.value}",
        f"- Ground truth: {record.true_label.value}",
        f"- Decision: {outcome.decision.value}",
        f"- Final diagnosis: {outcome.final_label.value if outcome.final_label else 'none (manual review)'}",
        f"- Verification status: {record.status.value}",
        "",
        "## Rule-based diagnosis",
        "",
        f"{record.rule.label.value} ({record.rule.confidence:.1%})",
    ]
    if record.calibrated_rule_confidence is not None:
        lines.append(f"Calibrated confidence: {record.calibrated_rule_confidence:.1%}")
    lines += ["", "## Features", "", *format_feature_lines(record.features)]

    lines += ["", "## Arbiter"]
    if record.verdict is None:
        lines += ["", f"Not consulted: {outcome.cause or 'unavailable'}"]
    else:
        verdict = record.verdict
        votes = ", ".join(f"{label.value}: {count}" for label, count in verdict.votes.items())
        lines += [
            "",
            f"{verdict.label.value} (vote share {verdict.confidence:.2f}, {verdict.n_parsed}/{verdict.n_requested} parsed)",
            f"Votes: {votes}",
        ]
        if record.calibrated_llm_confidence is not None:
            lines.append(f"Calibrated confidence: {record.calibrated_llm_confidence:.1%}")
        for heading, text in verdict.step_reports.items():
            lines += ["", f"### {heading}", "", text]
        if verdict.rationale:
            lines += ["", f"Rationale: {verdict.rationale}"]

    if outcome.audit is not None:
        audit = outcome.audit
        lines += [
            "",
            "## Arbitration audit",
            "",
            f"- theta = {audit.theta}, delta = {audit.delta}",
            f"- labels agree: {audit.labels_agree}",
            f"- agreement meets theta: {audit.agreement_meets_theta}",
            f"- arbiter margin meets delta: {audit.margin_meets_delta}",
            f"- arbiter meets theta: {audit.llm_meets_theta}",
        ]
        if audit.note:
            lines.append(f"- note: {audit.note}")
    if record.panel_path is not None:
        lines += ["", f"![Diagnostic panel]({record.panel_path.name})"]
    return "\n".join(lines) + "\n"
