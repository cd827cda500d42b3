from typing import Optional

from pydantic import BaseModel, Field, model_validator

from fault_arbiter.schemas.enums import FaultClass


# === Metric Building Blocks ===


class ReliabilityBin(BaseModel):
    """One reliability-diagram bin (lower, upper]."""

    lower: float
    upper: float
    count: int
    mean_confidence: float
    accuracy: float

    @property
    def gap(self) -> float:
        return abs(self.accuracy - self.mean_confidence)


class CoverageRow(BaseModel):
    """Selective-prediction operating point at a confidence threshold."""

    threshold: float
    coverage: float
    risk: float
    count: int


class ClassMetrics(BaseModel):
    """One-vs-rest metrics over answered samples."""

    label: FaultClass
    precision: float
    recall: float
    f1: float
    support: int


class EvalReport(BaseModel):
    """Metric suite for one system on one split."""

    system: str
    n_samples: int
    n_answered: int
    coverage: float
    abstention_rate: float
    accuracy: float = Field(..., description="Accuracy over answered samples")
    full_accuracy: float = Field(..., description="Accuracy counting abstentions as errors")
    ece: float
    adaptive_ece: float
    nll: float
    brier: float
    aurc: float
    auacc: float
    per_class: list[ClassMetrics] = Field(default_factory=list)
    reliability: list[ReliabilityBin] = Field(default_factory=list)
    risk_coverage: list[tuple[float, float]] = Field(
        default_factory=list, description="(coverage, risk) per prefix, highest confidence first"
    )
    coverage_table: list[CoverageRow] = Field(default_factory=list)

    @model_validator(mode="after")
    def validate_identities(self) -> "EvalReport":
        if abs(self.aurc + self.auacc - 1.0) > 1e-9:
            raise ValueError("AURC + AUACC must equal 1")
        coverages = [row.coverage for row in self.coverage_table]
        if any(later > earlier for earlier, later in zip(coverages, coverages[1:])):
            raise ValueError("coverage must be nonincreasing in the threshold")
        return self

    def max_calibration_gap(self, min_count: int = 20) -> Optional[float]:
        """Largest |acc - conf| over bins holding at least min_count samples."""
        gaps = [b.gap for b in self.reliability if b.count >= min_count]
        return max(gaps) if gaps else None


# === Experiment Reports ===


class MetricSummary(BaseModel):
    """Mean and standard deviation of one metric across repeats."""

    mean: float
    std: float
    values: list[float] = Field(default_factory=list)


class SystemSummary(BaseModel):
    """Aggregated metrics for one system across repeats."""

    system: str
    metrics: dict[str, MetricSummary]


class AcceptanceChecks(BaseModel):
    """Directional checks of the hybrid pipeline against the baseline."""

    accuracy_uplift_pts: float
    accuracy_uplift_pass: bool
    ece_ratio: Optional[float]
    ece_halving_pass: bool
    max_calibration_gap: Optional[float]
    calibration_gap_pass: bool
    aurc_direction_pass: bool
    aurc_identity_pass: bool


class ComparisonReport(BaseModel):
    """Comparison table across systems (rows) and metrics (columns)."""

    seeds: list[int]
    backend: str
    systems: list[SystemSummary]
    acceptance: Optional[AcceptanceChecks] = None
    external_rows: list[str] = Field(
        default_factory=lambda: ["SVM", "1D-CNN"],
        description="Labeled empty rows for externally reported baselines",
    )

    def system(self, name: str) -> SystemSummary:
        for summary in self.systems:
            if summary.system == name:
                return summary
        raise KeyError(name)


# === Sweep ===


class SweepRow(BaseModel):
    """One (theta, delta) grid point evaluated on the validation split."""

    theta: float
    delta: float
    coverage: float
    accuracy: float
    aurc: float
    auacc: float
    feasible: bool


class SweepResult(BaseModel):
    """Sweep grid plus the selected pair."""

    rows: list[SweepRow]
    best_theta: float
    best_delta: float
    min_coverage: float
    constraint_met: bool


# === Single Run ===


class EvaluationSummary(BaseModel):
    """Test-split reports of every system for one seed."""

    seed: int
    backend: str
    n_test: int
    reports: list[EvalReport]
    sweep: Optional[SweepResult] = None

    def report(self, system: str) -> EvalReport:
        for report in self.reports:
            if report.system == system:
                return report
        raise KeyError(system)
