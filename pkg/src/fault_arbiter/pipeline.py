"""
End-to-end diagnosis pipeline.

DiagnosisPipeline owns the stage logic behind every CLI subcommand:

    synth -> extract -> train -> diagnose -> arbitrate -> calibrate -> evaluate -> report
                                                                   \\-> sweep

Each stage takes its inputs from the previous stage when they are held in
memory and otherwise reads them from the artifact layout under
config.out_dir, so the subcommands can run one at a time. With
persist=False nothing is written (used by repeated experiments).

run_experiment repeats the whole pipeline over R seeds and aggregates the
per-system metrics as mean and standard deviation.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict

from fault_arbiter import bayes_engine, reporting
from fault_arbiter.arbiter import (
    ArbiterBackend,
    ChatCompletionsBackend,
    NormalBaseline,
    OracleBackend,
    abstain_on_failure,
    arbiter_verdict,
    arbitrate,
    build_prompt,
)
from fault_arbiter.bayes_engine import NaiveBayesModel
from fault_arbiter.calibration import CalibrationBundle, CalibrationSample, calibrate_pipeline
from fault_arbiter.chart_render import build_panel, render_panel
from fault_arbiter.config import RunConfig, load_llm_credentials
from fault_arbiter.dsp_features import extract_all
from fault_arbiter.exceptions import (
    ArbiterUnavailableError,
    InsufficientDataError,
    PersistenceError,
)
from fault_arbiter.metrics import SystemPrediction, evaluate_system, risk_coverage
from fault_arbiter.params import BUNDLE_FORMAT_VERSION
from fault_arbiter.schemas.diagnosis_schema import (
    ArbiterVerdict,
    ArbitrationOutcome,
    CaseRecord,
    Diagnosis,
    verification_status,
)
from fault_arbiter.schemas.enums import CANONICAL_CLASSES, BackendKind, Decision, FaultClass, Split
from fault_arbiter.schemas.report_schema import (
    AcceptanceChecks,
    ComparisonReport,
    EvaluationSummary,
    MetricSummary,
    SweepResult,
    SweepRow,
    SystemSummary,
)
from fault_arbiter.schemas.signal_schema import Dataset, DatasetEntry, Signal
from fault_arbiter.signal_synth import synthesize_dataset
from fault_arbiter.storage import (
    DiagnosisRow,
    FeatureRow,
    load_dataset,
    load_json,
    quantize,
    read_cases,
    read_diagnoses,
    read_features,
    save_json,
    write_bytes,
    write_cases,
    write_dataset,
    write_diagnoses,
    write_features,
    write_text,
)


logger = logging.getLogger(__name__)


BASELINE_NB = "Baseline-NB"
HCAA_UNCALIBRATED = "HCAA-Uncalibrated"
HCAA_CALIBRATED = "HCAA-Calibrated"
HCAA_ISOTONIC = "HCAA-Isotonic"
SYSTEMS = (BASELINE_NB, HCAA_UNCALIBRATED, HCAA_CALIBRATED, HCAA_ISOTONIC)

SUMMARY_METRICS = (
    "accuracy",
    "full_accuracy",
    "coverage",
    "ece",
    "adaptive_ece",
    "nll",
    "brier",
    "aurc",
    "auacc",
)

# Directional thresholds of the acceptance checks
ACCURACY_UPLIFT_PTS = 10.0
ECE_RATIO_LIMIT = 0.5
CALIBRATION_GAP_LIMIT = 0.10


class ArtifactLayout(BaseModel):
    """Paths of every artifact under one output root."""

    model_config = ConfigDict(frozen=True)

    root: Path

    @property
    def dataset_dir(self) -> Path:
        return self.root / "dataset"

    @property
    def features(self) -> Path:
        return self.root / "features.csv"

    @property
    def model(self) -> Path:
        return self.root / "model.json"

    @property
    def baseline(self) -> Path:
        return self.root / "normal_baseline.json"

    @property
    def diagnoses(self) -> Path:
        return self.root / "diagnoses.csv"

    @property
    def cases_dir(self) -> Path:
        return self.root / "cases"

    @property
    def cases(self) -> Path:
        return self.root / "cases.jsonl"

    @property
    def calibrated_cases(self) -> Path:
        return self.root / "cases_calibrated.jsonl"

    @property
    def calibration(self) -> Path:
        return self.root / "calibration.json"

    @property
    def evaluation(self) -> Path:
        return self.root / "evaluation.json"

    @property
    def comparison(self) -> Path:
        return self.root / "comparison.csv"

    @property
    def report_dir(self) -> Path:
        return self.root / "report"

    @property
    def sweep(self) -> Path:
        return self.root / "sweep.csv"

    @property
    def sweep_json(self) -> Path:
        return self.root / "sweep.json"

    @property
    def experiment_dir(self) -> Path:
        return self.root / "experiment"

    def panel(self, sample_id: str) -> Path:
        return self.cases_dir / f"{sample_id}_panel.png"

    def case_report(self, sample_id: str) -> Path:
        return self.cases_dir / f"{sample_id}_report.md"


def full_posteriors(diagnosis: Diagnosis) -> list[float]:
    """Posterior vector over every canonical class (0 for classes the model never saw)."""
    by_class = dict(zip(diagnosis.classes, diagnosis.posteriors))
    return [by_class.get(cls, 0.0) for cls in CANONICAL_CLASSES]


def _final_prediction(record: CaseRecord) -> SystemPrediction:
    return SystemPrediction(
        true_label=record.true_label,
        label=record.outcome.final_label,
        confidence=record.outcome.final_confidence,
    )


class DiagnosisPipeline:
    """
    Stage runner for one seed.

    Args:
        config: Run configuration (out_dir is the artifact root)
        backend: Arbiter backend; built from config.arbitration when omitted
        persist: Write stage artifacts under config.out_dir
    """

    def __init__(
        self,
        config: RunConfig,
        backend: ArbiterBackend | OracleBackend | None = None,
        persist: bool = True,
    ) -> None:
        self.config = config
        self.paths = ArtifactLayout(root=config.out_dir)
        self.persist = persist
        self._backend = backend
        self._owns_backend = backend is None

        self.dataset: Optional[Dataset] = None
        self.features: Optional[list[FeatureRow]] = None
        self.model: Optional[NaiveBayesModel] = None
        self.baseline: Optional[NormalBaseline] = None
        self.diagnoses: Optional[list[DiagnosisRow]] = None
        self.cases: Optional[list[CaseRecord]] = None
        self.bundle: Optional[CalibrationBundle] = None
        self.evaluation: Optional[EvaluationSummary] = None
        self._signals: Optional[dict[str, Signal]] = None

    # === Inputs ===

    def _dataset(self) -> Dataset:
        if self.dataset is None:
            self.dataset = load_dataset(self.paths.dataset_dir)
        return self.dataset

    def _signal(self, sample_id: str) -> Signal:
        if self._signals is None:
            self._signals = {entry.signal.id: entry.signal for entry in self._dataset().entries}
        return self._signals[sample_id]

    def _features(self) -> list[FeatureRow]:
        if self.features is None:
            self.features = read_features(self.paths.features)
        return self.features

    def _model(self) -> NaiveBayesModel:
        if self.model is None:
            self.model = bayes_engine.load_model(self.paths.model)
        return self.model

    def _baseline(self) -> NormalBaseline:
        if self.baseline is None:
            self.baseline = load_json(NormalBaseline, self.paths.baseline)
        return self.baseline

    def _diagnoses(self) -> list[DiagnosisRow]:
        if self.diagnoses is None:
            self.diagnoses = read_diagnoses(self.paths.diagnoses)
        return self.diagnoses

    def _cases(self) -> list[CaseRecord]:
        if self.cases is None:
            self.cases = read_cases(self.paths.cases)
        return self.cases

    def _bundle(self) -> CalibrationBundle:
        if self.bundle is None:
            bundle = load_json(CalibrationBundle, self.paths.calibration)
            if bundle.format_version != BUNDLE_FORMAT_VERSION:
                raise PersistenceError(
                    f"Calibration bundle version {bundle.format_version} is not supported",
                    str(self.paths.calibration),
                )
            self.bundle = bundle
        return self.bundle

    def backend(self) -> ArbiterBackend | OracleBackend:
        """The configured arbiter backend (the oracle uses the fitted normal baseline)."""
        if self._backend is None:
            settings = self.config.arbitration
            if settings.backend == BackendKind.ORACLE:
                self._backend = OracleBackend(self._baseline())
            else:
                audit = settings.llm.audit_log
                self._backend = ChatCompletionsBackend(
                    settings.llm,
                    api_key=load_llm_credentials().api_key,
                    audit_path=self.config.out_dir / audit if audit else None,
                )
        return self._backend

    def close(self) -> None:
        if self._owns_backend and isinstance(self._backend, ArbiterBackend):
            self._backend.close()

    # === Stages ===

    def synth(self) -> Dataset:
        """Generate the dataset; samples are stored as they read back from disk."""
        generated = synthesize_dataset(self.config.dataset_spec(), self.config.workers)
        self.dataset = Dataset(
            entries=[DatasetEntry(signal=quantize(e.signal), split=e.split) for e in generated.entries]
        )
        self._signals = None
        if self.persist:
            write_dataset(self.dataset, self.paths.dataset_dir)
        return self.dataset

    def extract(self) -> list[FeatureRow]:
        """Feature vector of every recording, in dataset order."""
        dataset = self._dataset()
        cfg = self.config.features

        def _one(entry: DatasetEntry) -> FeatureRow:
            result = extract_all(entry.signal, cfg)
            return FeatureRow(entry.signal.id, entry.split, entry.signal.label, result.features)

        logger.info(
            f"Extracting features from {len(dataset)} recordings",
            extra={"n_samples": len(dataset), "workers": self.config.workers},
        )
        with ThreadPoolExecutor(max_workers=self.config.workers) as executor:
            self.features = list(executor.map(_one, dataset.entries))
        if self.persist:
            write_features(self.features, self.paths.features)
        return self.features

    def train(self) -> NaiveBayesModel:
        """Fit the rule engine and the oracle's normal baseline on the training split."""
        train = [row for row in self._features() if row.split == Split.TRAIN]
        logger.info(f"Training on {len(train)} recordings", extra={"n_samples": len(train)})
        self.model = bayes_engine.fit([(row.features, row.true_label) for row in train], self.config.bayes)
        self.baseline = NormalBaseline.fit(
            [row.features for row in train if row.true_label == FaultClass.NORMAL]
        )
        if self.persist:
            bayes_engine.save_model(self.model, self.paths.model)
            save_json(self.baseline, self.paths.baseline)
        return self.model

    def diagnose(self) -> list[DiagnosisRow]:
        """Rule-engine diagnosis of every recording."""
        rows = self._features()
        diagnoses = bayes_engine.diagnose_many(self._model(), [row.features for row in rows])
        self.diagnoses = [
            DiagnosisRow(row.sample_id, row.split, row.true_label, diagnosis)
            for row, diagnosis in zip(rows, diagnoses)
        ]
        if self.persist:
            write_diagnoses(self.diagnoses, self.paths.diagnoses)
        return self.diagnoses

    def arbitrate(self, splits: tuple[Split, ...] = (Split.VAL, Split.TEST)) -> list[CaseRecord]:
        """
        Consult the arbiter on every case of the given splits.

        Outcomes use the raw confidences. A case whose arbiter cannot be
        consulted abstains with the failure as its cause.

        Raises:
            ArbiterUnavailableError: If the arbiter failed on every case
        """
        features = {row.sample_id: row.features for row in self._features()}
        rows = [row for row in self._diagnoses() if row.split in splits]
        backend = self.backend()
        settings = self.config.arbitration
        text_backend = isinstance(backend, ArbiterBackend)
        if text_backend and self.persist and rows:
            # load the signal index once, before the workers need it
            self._signal(rows[0].sample_id)

        def _one(row: DiagnosisRow) -> tuple[Optional[ArbiterVerdict], Optional[str], Optional[Path]]:
            d = row.diagnosis
            panel = self._render_panel(row.sample_id) if text_backend and self.persist else None
            bundle = (
                build_prompt(features[row.sample_id], d.label, d.confidence, panel, case_id=row.sample_id)
                if text_backend
                else None
            )
            try:
                verdict = arbiter_verdict(features[row.sample_id], bundle, d.label, d.confidence, settings, backend)
            except ArbiterUnavailableError as exc:
                logger.warning(
                    f"Arbiter unavailable for {row.sample_id}; abstaining: {exc.message}",
                    extra={"sample_id": row.sample_id, "reason": exc.details.get("reason")},
                )
                return None, exc.message, panel
            logger.debug(f"{row.sample_id}: arbiter says {verdict.label.value} ({verdict.confidence:.2f})")
            return verdict, None, panel

        logger.info(
            f"Arbitrating {len(rows)} cases with the {backend.kind.value} backend",
            extra={"n_cases": len(rows), "backend": backend.kind.value},
        )
        with ThreadPoolExecutor(max_workers=self.config.workers) as executor:
            results = list(executor.map(_one, rows))

        if rows and all(verdict is None for verdict, _, _ in results):
            raise ArbiterUnavailableError(
                message=f"Arbiter failed on all {len(rows)} cases; first cause: {results[0][1]}",
                reason="all_cases_failed",
                details={"n_cases": len(rows)},
            )

        records = []
        for row, (verdict, cause, panel) in zip(rows, results):
            outcome = self._decide(row.diagnosis.label, row.diagnosis.confidence, verdict, cause)
            records.append(
                CaseRecord(
                    sample_id=row.sample_id,
                    split=row.split,
                    true_label=row.true_label,
                    features=features[row.sample_id],
                    rule=row.diagnosis,
                    verdict=verdict,
                    outcome=outcome,
                    status=verification_status(outcome, row.true_label),
                    panel_path=panel,
                )
            )
        self.cases = self._with_evidence(records)
        if self.persist:
            write_cases(self.cases, self.paths.cases)
        return self.cases

    def calibrate(self) -> CalibrationBundle:
        """Fit the calibration bundle on the validation cases."""
        samples = [
            CalibrationSample(
                sample_id=case.sample_id,
                split=case.split,
                true_label=case.true_label,
                log_scores=case.rule.log_scores,
                rule_label=case.rule.label,
                rule_confidence=case.rule.confidence,
                llm_label=case.verdict.label if case.verdict else None,
                llm_confidence=case.verdict.confidence if case.verdict else None,
                classes=case.rule.classes,
            )
            for case in self._cases()
            if case.split == Split.VAL
        ]
        self.bundle = calibrate_pipeline(samples, self.config.calibration)
        if self.persist:
            save_json(self.bundle, self.paths.calibration)
        return self.bundle

    def evaluate(self) -> EvaluationSummary:
        """
        Evaluate every system on the test split.

        Raises:
            InsufficientDataError: If the test split is empty
            DataLeakageError: If the bundle saw any test case
        """
        test = [case for case in self._cases() if case.split == Split.TEST]
        if not test:
            raise InsufficientDataError("No test-split cases to evaluate", counts={"test": 0}, required=1)
        bundle = self._bundle()
        bundle.assert_no_leakage([case.sample_id for case in test])

        calibrated = [self.recalibrate(case, bundle) for case in test]
        isotonic = [self.recalibrate(case, bundle, isotonic_rule=True) for case in test]
        classes = list(CANONICAL_CLASSES)
        n_bins = self.config.calibration.n_bins

        baseline = [
            SystemPrediction(case.true_label, case.rule.label, case.rule.confidence, full_posteriors(case.rule))
            for case in test
        ]
        reports = [
            evaluate_system(BASELINE_NB, baseline, classes, n_bins),
            evaluate_system(HCAA_UNCALIBRATED, [_final_prediction(c) for c in test], classes, n_bins),
            evaluate_system(HCAA_CALIBRATED, [_final_prediction(c) for c in calibrated], classes, n_bins),
            evaluate_system(HCAA_ISOTONIC, [_final_prediction(c) for c in isotonic], classes, n_bins),
        ]
        self.evaluation = EvaluationSummary(
            seed=self.config.seed,
            backend=self.config.arbitration.backend.value if self._owns_backend else self.backend().kind.value,
            n_test=len(test),
            reports=reports,
        )
        if self.persist:
            write_cases(self._with_evidence(calibrated), self.paths.calibrated_cases)
            save_json(self.evaluation, self.paths.evaluation)
            reporting.write_comparison_table(self.evaluation, self.paths.comparison)
        return self.evaluation

    def report(self) -> Path:
        """Markdown summary, SVG plots and per-system CSVs under report/."""
        evaluation = self.evaluation or load_json(EvaluationSummary, self.paths.evaluation)
        sweep = None
        if self.paths.sweep_json.is_file():
            sweep = load_json(SweepResult, self.paths.sweep_json)
        return reporting.write_report(evaluation, self.paths.report_dir, sweep)

    def sweep(self) -> SweepResult:
        """
        Evaluate the (theta, delta) grid on the validation split with calibrated confidences.

        The selected pair maximizes AUACC among pairs meeting the minimum
        coverage; ties prefer higher coverage, then lower theta, then lower delta.
        """
        val = [case for case in self._cases() if case.split == Split.VAL]
        if not val:
            raise InsufficientDataError("No validation cases to sweep", counts={"val": 0}, required=1)
        bundle = self._bundle()
        settings = self.config.experiment
        inputs = [
            (
                case,
                bundle.rule_confidence(case.rule.log_scores),
                bundle.llm_confidence(case.verdict.confidence) if case.verdict else None,
            )
            for case in val
        ]

        rows = []
        for theta in settings.theta_grid:
            for delta in settings.delta_grid:
                answered = []
                for case, c_rule, c_llm in inputs:
                    if case.verdict is None:
                        continue
                    outcome = arbitrate(case.rule.label, c_rule, case.verdict.label, c_llm, theta, delta)
                    if outcome.decision != Decision.ABSTAIN:
                        answered.append((outcome.final_confidence, outcome.final_label == case.true_label))
                coverage = len(answered) / len(val)
                if answered:
                    conf, hits = zip(*answered)
                    selective = risk_coverage(conf, hits)
                    accuracy, aurc, auacc = float(np.mean(hits)), selective.aurc, selective.auacc
                else:
                    accuracy, aurc, auacc = 0.0, 1.0, 0.0
                rows.append(
                    SweepRow(
                        theta=theta,
                        delta=delta,
                        coverage=coverage,
                        accuracy=accuracy,
                        aurc=aurc,
                        auacc=auacc,
                        feasible=bool(answered) and coverage >= settings.min_coverage,
                    )
                )

        feasible = [row for row in rows if row.feasible]
        best = max(feasible or rows, key=lambda r: (r.auacc, r.coverage, -r.theta, -r.delta))
        result = SweepResult(
            rows=rows,
            best_theta=best.theta,
            best_delta=best.delta,
            min_coverage=settings.min_coverage,
            constraint_met=bool(feasible),
        )
        logger.info(
            f"Sweep selected theta={best.theta} delta={best.delta} "
            f"(AUACC {best.auacc:.3f}, coverage {best.coverage:.3f})",
            extra={"constraint_met": result.constraint_met, "n_points": len(rows)},
        )
        if self.persist:
            reporting.write_sweep_table(result, self.paths.sweep)
            save_json(result, self.paths.sweep_json)
        return result

    def run_all(self) -> EvaluationSummary:
        """Every stage from synthesis to evaluation (and the report when persisting)."""
        try:
            self.synth()
            self.extract()
            self.train()
            self.diagnose()
            self.arbitrate()
            self.calibrate()
            evaluation = self.evaluate()
            if self.persist:
                self.report()
            return evaluation
        finally:
            self.close()

    # === Case Helpers ===

    def _decide(
        self,
        d_rule: FaultClass,
        c_rule: float,
        verdict: Optional[ArbiterVerdict],
        cause: Optional[str],
        c_llm: Optional[float] = None,
    ) -> ArbitrationOutcome:
        if verdict is None:
            return abstain_on_failure(d_rule, c_rule, cause or "arbiter unavailable")
        settings = self.config.arbitration
        return arbitrate(
            d_rule,
            c_rule,
            verdict.label,
            verdict.confidence if c_llm is None else c_llm,
            settings.theta,
            settings.delta,
        )

    def recalibrate(self, case: CaseRecord, bundle: CalibrationBundle, isotonic_rule: bool = False) -> CaseRecord:
        """
        The case re-decided with calibrated confidences.

        The rule confidence is the max temperature-scaled posterior (or the
        isotonic map of the raw confidence); the arbiter confidence is the
        isotonic map of the vote share.
        """
        if isotonic_rule:
            c_rule = bundle.rule_confidence_isotonic(case.rule.confidence)
        else:
            c_rule = bundle.rule_confidence(case.rule.log_scores)
        c_llm = bundle.llm_confidence(case.verdict.confidence) if case.verdict else None
        outcome = self._decide(case.rule.label, c_rule, case.verdict, case.outcome.cause, c_llm)
        return case.model_copy(
            update={
                "outcome": outcome,
                "status": verification_status(outcome, case.true_label),
                "calibrated_rule_confidence": c_rule,
                "calibrated_llm_confidence": c_llm,
                "report_path": None,
            }
        )

    def _render_panel(self, sample_id: str) -> Path:
        signal = self._signal(sample_id)
        extraction = extract_all(signal, self.config.features)
        charts = self.config.charts
        panel = build_panel(signal, extraction.spectra, extraction.features, charts)
        image = render_panel(panel, (charts.width, charts.height), charts)
        return write_bytes(image.data, self.paths.panel(sample_id))

    def _with_evidence(self, records: list[CaseRecord]) -> list[CaseRecord]:
        """Attach the manual-review bundle (panel and report) to abstentions, or to every case when configured."""
        if not self.persist:
            return records
        render_all = self.config.arbitration.render_all_panels
        updated = []
        for record in records:
            if record.outcome.decision != Decision.ABSTAIN and not render_all:
                updated.append(record)
                continue
            panel = record.panel_path or self._render_panel(record.sample_id)
            record = record.model_copy(update={"panel_path": panel})
            report = write_text(reporting.format_case_report(record), self.paths.case_report(record.sample_id))
            outcome = record.outcome.model_copy(update={"evidence": {"panel": str(panel), "report": str(report)}})
            updated.append(record.model_copy(update={"report_path": report, "outcome": outcome}))
        return updated


# === Experiment ===


def _summary(values: list[float]) -> MetricSummary:
    data = np.asarray(values, dtype=float)
    std = float(data.std(ddof=1)) if data.size > 1 else 0.0
    return MetricSummary(mean=float(data.mean()), std=std, values=[float(v) for v in data])


def acceptance_checks(
    summaries: dict[str, SystemSummary], gaps: list[Optional[float]], identity_ok: bool
) -> AcceptanceChecks:
    """Directional checks of HCAA-Calibrated against Baseline-NB and HCAA-Uncalibrated."""
    baseline = summaries[BASELINE_NB].metrics
    uncalibrated = summaries[HCAA_UNCALIBRATED].metrics
    calibrated = summaries[HCAA_CALIBRATED].metrics

    uplift = 100.0 * (calibrated["accuracy"].mean - baseline["accuracy"].mean)
    raw_ece = uncalibrated["ece"].mean
    ratio = calibrated["ece"].mean / raw_ece if raw_ece > 0 else None
    measured = [gap for gap in gaps if gap is not None]
    gap = float(np.mean(measured)) if measured else None

    return AcceptanceChecks(
        accuracy_uplift_pts=uplift,
        accuracy_uplift_pass=uplift >= ACCURACY_UPLIFT_PTS,
        ece_ratio=ratio,
        ece_halving_pass=ratio is not None and ratio <= ECE_RATIO_LIMIT,
        max_calibration_gap=gap,
        calibration_gap_pass=gap is not None and gap <= CALIBRATION_GAP_LIMIT,
        aurc_direction_pass=calibrated["aurc"].mean < baseline["aurc"].mean,
        aurc_identity_pass=identity_ok,
    )


def run_experiment(
    config: RunConfig, backend: ArbiterBackend | OracleBackend | None = None
) -> ComparisonReport:
    """
    Run the full pipeline for seeds seed, seed+1, ... and aggregate.

    Each repeat re-synthesizes its dataset from its own seed. Per-seed
    artifacts are written under <out>/experiment/seed_<n> when
    experiment.keep_artifacts is set; the comparison report is always
    written under <out>/experiment.
    """
    settings = config.experiment
    seeds = [config.seed + r for r in range(settings.repeats)]
    paths = ArtifactLayout(root=config.out_dir)
    values: dict[str, dict[str, list[float]]] = {s: {m: [] for m in SUMMARY_METRICS} for s in SYSTEMS}
    gaps: list[Optional[float]] = []
    identity_ok = True

    for seed in seeds:
        logger.info(f"Experiment repeat with seed {seed}", extra={"seed": seed, "repeats": len(seeds)})
        pipeline = DiagnosisPipeline(
            config.for_seed(seed, paths.experiment_dir / f"seed_{seed}"),
            backend=backend,
            persist=settings.keep_artifacts,
        )
        evaluation = pipeline.run_all()
        for report in evaluation.reports:
            for metric in SUMMARY_METRICS:
                values[report.system][metric].append(float(getattr(report, metric)))
            identity_ok = identity_ok and abs(report.aurc + report.auacc - 1.0) <= 1e-9
        gaps.append(evaluation.report(HCAA_CALIBRATED).max_calibration_gap(config.calibration.min_bin_count))

    summaries = {
        system: SystemSummary(system=system, metrics={m: _summary(v) for m, v in metrics.items()})
        for system, metrics in values.items()
    }
    comparison = ComparisonReport(
        seeds=seeds,
        backend=backend.kind.value if backend is not None else config.arbitration.backend.value,
        systems=list(summaries.values()),
        acceptance=acceptance_checks(summaries, gaps, identity_ok),
    )
    reporting.write_experiment(comparison, paths.experiment_dir)
    return comparison
