"""
Tests for the end-to-end diagnosis pipeline (pipeline.py).

The rule-engine stages are run once per module on a small dataset; each
test starts a fresh DiagnosisPipeline from those in-memory results.
"""

import pytest

from fault_arbiter.arbiter import RecordedBackend
from fault_arbiter.config import RunConfig, load_run_config
from fault_arbiter.exceptions import ArbiterUnavailableError, DataLeakageError, InsufficientDataError
from fault_arbiter.pipeline import (
    BASELINE_NB,
    HCAA_CALIBRATED,
    HCAA_UNCALIBRATED,
    SYSTEMS,
    ArtifactLayout,
    DiagnosisPipeline,
    acceptance_checks,
    full_posteriors,
    run_experiment,
)
from fault_arbiter.schemas.enums import CANONICAL_CLASSES, Decision, Split
from fault_arbiter.schemas.report_schema import MetricSummary, SystemSummary


@pytest.fixture(scope="module")
def module_config(tmp_path_factory) -> RunConfig:
    return load_run_config(
        overrides={
            "seed": 11,
            "out_dir": tmp_path_factory.mktemp("pipeline") / "run",
            "workers": 2,
            "synth": {"per_class": 10, "duration": 1.0, "sample_rate": 10000.0},
            "charts": {"width": 600, "height": 450},
        }
    )


@pytest.fixture(scope="module")
def diagnosed(module_config) -> DiagnosisPipeline:
    """Pipeline run in memory through the diagnose stage."""
    pipeline = DiagnosisPipeline(module_config, persist=False)
    pipeline.synth()
    pipeline.extract()
    pipeline.train()
    pipeline.diagnose()
    return pipeline


@pytest.fixture
def fresh(module_config, diagnosed):
    """Factory for pipelines that start from the diagnosed stage."""

    def _fresh(backend=None) -> DiagnosisPipeline:
        pipeline = DiagnosisPipeline(module_config, backend=backend, persist=False)
        pipeline.dataset = diagnosed.dataset
        pipeline.features = diagnosed.features
        pipeline.model = diagnosed.model
        pipeline.baseline = diagnosed.baseline
        pipeline.diagnoses = diagnosed.diagnoses
        return pipeline

    return _fresh


def _ids(pipeline: DiagnosisPipeline, split: Split) -> list[str]:
    return [row.sample_id for row in pipeline.diagnoses if row.split == split]


# ============================================================================
# Rule-Engine Stages
# ============================================================================


class TestRuleStages:
    """Test synthesis through diagnosis."""

    def test_split_sizes(self, diagnosed):
        assert diagnosed.dataset.split_sizes() == {Split.TRAIN: 49, Split.VAL: 14, Split.TEST: 7}

    def test_one_feature_row_and_diagnosis_per_recording(self, diagnosed):
        ids = [entry.signal.id for entry in diagnosed.dataset.entries]

        assert [row.sample_id for row in diagnosed.features] == ids
        assert [row.sample_id for row in diagnosed.diagnoses] == ids

    def test_model_knows_every_class(self, diagnosed):
        assert set(diagnosed.model.classes) == set(CANONICAL_CLASSES)

    def test_full_posteriors_follow_canonical_order(self, diagnosed):
        diagnosis = diagnosed.diagnoses[0].diagnosis

        posteriors = full_posteriors(diagnosis)

        assert len(posteriors) == 7
        assert sum(posteriors) == pytest.approx(1.0)
        assert max(posteriors) == pytest.approx(diagnosis.confidence)


# ============================================================================
# Arbitration and Calibration
# ============================================================================


class TestArbitration:
    """Test the arbitrate, calibrate, evaluate and sweep stages."""

    def test_oracle_arbitrates_val_and_test(self, fresh):
        pipeline = fresh()

        cases = pipeline.arbitrate()

        assert {case.split for case in cases} == {Split.VAL, Split.TEST}
        assert len(cases) == 21
        assert all(case.verdict is not None for case in cases)

    def test_calibration_sees_validation_only(self, fresh):
        pipeline = fresh()
        pipeline.arbitrate()

        bundle = pipeline.calibrate()

        assert sorted(bundle.fit_sample_ids) == sorted(_ids(pipeline, Split.VAL))
        assert bundle.isotonic is not None

    def test_evaluate_reports_every_system(self, fresh):
        pipeline = fresh()
        pipeline.arbitrate()
        pipeline.calibrate()

        evaluation = pipeline.evaluate()

        assert [r.system for r in evaluation.reports] == list(SYSTEMS)
        assert evaluation.n_test == 7
        assert evaluation.report(BASELINE_NB).coverage == 1.0
        for report in evaluation.reports:
            assert report.aurc + report.auacc == pytest.approx(1.0)
            assert report.n_samples == 7

    def test_recalibrated_cases_carry_calibrated_confidences(self, fresh):
        pipeline = fresh()
        cases = pipeline.arbitrate()
        bundle = pipeline.calibrate()

        updated = pipeline.recalibrate(cases[0], bundle)

        assert updated.calibrated_rule_confidence == pytest.approx(bundle.rule_confidence(cases[0].rule.log_scores))
        assert updated.calibrated_llm_confidence is not None

    def test_leaked_bundle_rejected(self, fresh):
        pipeline = fresh()
        pipeline.arbitrate()
        bundle = pipeline.calibrate()
        leaked = _ids(pipeline, Split.TEST)[:1]
        pipeline.bundle = bundle.model_copy(update={"fit_sample_ids": bundle.fit_sample_ids + leaked})

        with pytest.raises(DataLeakageError) as exc:
            pipeline.evaluate()

        assert exc.value.details["leaked_ids"] == leaked

    def test_evaluate_without_test_cases(self, fresh):
        pipeline = fresh()
        pipeline.arbitrate(splits=(Split.VAL,))
        pipeline.calibrate()

        with pytest.raises(InsufficientDataError):
            pipeline.evaluate()

    def test_sweep_covers_grid(self, fresh, module_config):
        pipeline = fresh()
        pipeline.arbitrate()
        pipeline.calibrate()

        result = pipeline.sweep()

        settings = module_config.experiment
        assert len(result.rows) == len(settings.theta_grid) * len(settings.delta_grid)
        assert result.best_theta in settings.theta_grid
        assert result.best_delta in settings.delta_grid
        if result.constraint_met:
            best = next(r for r in result.rows if (r.theta, r.delta) == (result.best_theta, result.best_delta))
            assert best.coverage >= settings.min_coverage


class TestArbiterFailures:
    """Test cases whose arbiter cannot be consulted."""

    def test_missing_recordings_abstain(self, fresh, diagnosed, bearing_report):
        answered = _ids(diagnosed, Split.TEST)[0]
        pipeline = fresh(RecordedBackend({answered: [bearing_report]}))

        cases = pipeline.arbitrate(splits=(Split.TEST,))

        by_id = {case.sample_id: case for case in cases}
        assert by_id[answered].verdict is not None
        others = [case for case in cases if case.sample_id != answered]
        assert all(case.outcome.decision == Decision.ABSTAIN for case in others)
        assert all("No recorded response" in case.outcome.cause for case in others)

    def test_all_cases_failing(self, fresh):
        pipeline = fresh(RecordedBackend({}))

        with pytest.raises(ArbiterUnavailableError) as exc:
            pipeline.arbitrate(splits=(Split.TEST,))

        assert exc.value.details["reason"] == "all_cases_failed"
        assert exc.value.exit_code == 6


# ============================================================================
# Persisted Runs
# ============================================================================


class TestPersistedRun:
    """Test the on-disk artifact layout."""

    def test_run_all_writes_artifacts(self, tiny_config):
        evaluation = DiagnosisPipeline(tiny_config).run_all()

        paths = ArtifactLayout(root=tiny_config.out_dir)
        for path in (
            paths.dataset_dir / "manifest.csv",
            paths.features,
            paths.model,
            paths.baseline,
            paths.diagnoses,
            paths.cases,
            paths.calibrated_cases,
            paths.calibration,
            paths.evaluation,
            paths.comparison,
            paths.report_dir / "report.md",
        ):
            assert path.is_file(), path
        assert evaluation.report(HCAA_CALIBRATED).n_samples == 7

    def test_stages_resume_from_disk(self, tiny_config):
        DiagnosisPipeline(tiny_config).synth()

        rows = DiagnosisPipeline(tiny_config).extract()
        model = DiagnosisPipeline(tiny_config).train()

        assert len(rows) == 70
        assert set(model.classes) == set(CANONICAL_CLASSES)
        assert ArtifactLayout(root=tiny_config.out_dir).baseline.is_file()


# ============================================================================
# Experiment
# ============================================================================


def _system(name: str, accuracy: float, ece: float, aurc: float) -> SystemSummary:
    return SystemSummary(
        system=name,
        metrics={
            "accuracy": MetricSummary(mean=accuracy, std=0.0),
            "ece": MetricSummary(mean=ece, std=0.0),
            "aurc": MetricSummary(mean=aurc, std=0.0),
        },
    )


class TestAcceptanceChecks:
    """Test the directional checks."""

    def test_all_pass(self):
        summaries = {
            BASELINE_NB: _system(BASELINE_NB, 0.80, 0.10, 0.10),
            HCAA_UNCALIBRATED: _system(HCAA_UNCALIBRATED, 0.93, 0.08, 0.05),
            HCAA_CALIBRATED: _system(HCAA_CALIBRATED, 0.95, 0.02, 0.02),
        }

        checks = acceptance_checks(summaries, [0.05, None, 0.07], identity_ok=True)

        assert checks.accuracy_uplift_pts == pytest.approx(15.0)
        assert checks.accuracy_uplift_pass
        assert checks.ece_ratio == pytest.approx(0.25)
        assert checks.ece_halving_pass
        assert checks.max_calibration_gap == pytest.approx(0.06)
        assert checks.calibration_gap_pass
        assert checks.aurc_direction_pass

    def test_unmeasured_gap_and_zero_ece(self):
        summaries = {
            BASELINE_NB: _system(BASELINE_NB, 0.90, 0.10, 0.01),
            HCAA_UNCALIBRATED: _system(HCAA_UNCALIBRATED, 0.91, 0.0, 0.02),
            HCAA_CALIBRATED: _system(HCAA_CALIBRATED, 0.92, 0.0, 0.02),
        }

        checks = acceptance_checks(summaries, [None], identity_ok=True)

        assert not checks.accuracy_uplift_pass
        assert checks.ece_ratio is None
        assert not checks.ece_halving_pass
        assert checks.max_calibration_gap is None
        assert not checks.calibration_gap_pass
        assert not checks.aurc_direction_pass


@pytest.mark.slow
class TestRunExperiment:
    """Test repeated runs over consecutive seeds."""

    def test_two_repeats(self, tiny_config):
        config = tiny_config.model_copy(
            update={"experiment": tiny_config.experiment.model_copy(update={"repeats": 2})}
        )

        comparison = run_experiment(config)

        assert comparison.seeds == [11, 12]
        assert [s.system for s in comparison.systems] == list(SYSTEMS)
        assert len(comparison.system(BASELINE_NB).metrics["accuracy"].values) == 2
        assert comparison.acceptance.aurc_identity_pass
        assert (tiny_config.out_dir / "experiment" / "comparison.md").is_file()
        assert not (tiny_config.out_dir / "experiment" / "seed_11").exists()

    def test_hybrid_beats_rule_engine(self, tmp_path):
        """Test the accuracy, ECE and AURC checks with the default engine and oracle arbiter."""
        config = load_run_config(
            overrides={
                "seed": 3,
                "out_dir": tmp_path / "run",
                "workers": 4,
                "synth": {"per_class": 150},
                "experiment": {"repeats": 3},
            }
        )

        comparison = run_experiment(config)

        checks = comparison.acceptance
        assert comparison.system(BASELINE_NB).metrics["accuracy"].mean < 0.9
        assert checks.accuracy_uplift_pass, checks
        assert checks.ece_halving_pass, checks
        assert checks.aurc_direction_pass, checks
