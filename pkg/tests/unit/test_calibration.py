"""
Tests for temperature scaling, isotonic maps and the calibration bundle (calibration.py).
"""

import numpy as np
import pytest
from pydantic import ValidationError
from scipy import special

from fault_arbiter.calibration import (
    CalibrationBundle,
    CalibrationSample,
    IsotonicModel,
    TemperatureModel,
    apply_temperature,
    calibrate_pipeline,
    fit_isotonic,
    fit_temperature,
)
from fault_arbiter.exceptions import CalibrationFitError, DataLeakageError
from fault_arbiter.schemas.enums import CANONICAL_CLASSES, FaultClass, Split


def _sample_labels(logits: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    probs = special.softmax(logits, axis=1)
    draws = rng.random((logits.shape[0], 1))
    return np.minimum((probs.cumsum(axis=1) < draws).sum(axis=1), logits.shape[1] - 1)


@pytest.fixture
def calibrated_logits() -> tuple[np.ndarray, np.ndarray]:
    """Logits whose softmax is the true label distribution."""
    rng = np.random.default_rng(21)
    logits = rng.normal(0.0, 2.0, size=(4000, 7))
    return logits, _sample_labels(logits, rng)


def _identity_bundle(**overrides) -> CalibrationBundle:
    fields = {
        "temperature": TemperatureModel(temperature=1.0, nll_before=1.0, nll_after=1.0),
        "fit_sample_ids": ["normal_0001", "imbalance_0002"],
    }
    fields.update(overrides)
    return CalibrationBundle(**fields)


# ============================================================================
# Temperature Scaling
# ============================================================================


class TestFitTemperature:
    """Test recovery of the generating temperature."""

    def test_recovers_overconfident_scale(self, calibrated_logits):
        logits, labels = calibrated_logits

        model = fit_temperature(logits * 3.0, labels)

        assert model.temperature == pytest.approx(3.0, abs=0.3)
        assert model.nll_after < model.nll_before
        assert model.n_samples == 4000

    def test_calibrated_set_stays_near_one(self, calibrated_logits):
        logits, labels = calibrated_logits

        assert fit_temperature(logits, labels).temperature == pytest.approx(1.0, abs=0.1)

    def test_never_increases_nll(self, calibrated_logits):
        logits, labels = calibrated_logits

        model = fit_temperature(logits[:50] * 0.5, labels[:50])

        assert model.nll_after <= model.nll_before

    @pytest.mark.parametrize("true_temperature", [0.5, 2.0, 3.0])
    def test_recovers_generating_temperature(self, true_temperature):
        """Test that logits scaled by 1/T* are mapped back to within 10% of T*."""
        rng = np.random.default_rng(int(true_temperature * 100))
        logits = rng.normal(0.0, 1.5, size=(2000, 7))
        labels = _sample_labels(logits, rng)

        model = fit_temperature(logits * true_temperature, labels)

        assert model.temperature == pytest.approx(true_temperature, rel=0.1)

    def test_refines_with_golden_section(self, calibrated_logits):
        logits, labels = calibrated_logits

        model = fit_temperature(logits * 2.0, labels)

        assert model.iterations > 0
        assert model.nll_after <= model.nll_before

    def test_neg_inf_logits_allowed(self):
        """Test that a class ruled out by a zero prior does not break the fit."""
        rng = np.random.default_rng(5)
        logits = rng.normal(size=(40, 3))
        labels = _sample_labels(logits, rng)
        logits[:, 2] = -np.inf
        labels = np.minimum(labels, 1)

        model = fit_temperature(logits, labels)

        assert np.isfinite(model.nll_after)

    @pytest.mark.parametrize(
        "logits, labels",
        [
            (np.zeros((5, 3)), [0, 1, 2, 0, 1]),
            (np.zeros((12, 3)), [1] * 12),
            (np.full((12, 3), np.nan), [0, 1] * 6),
            (np.zeros((12, 3)), [0, 1] * 5 + [0, 3]),
        ],
        ids=["too_few", "single_class", "nan", "label_range"],
    )
    def test_rejects_bad_inputs(self, logits, labels):
        with pytest.raises(CalibrationFitError) as exc:
            fit_temperature(logits, labels)

        assert exc.value.details["method"] == "temperature"


class TestApplyTemperature:
    """Test scaled softmax."""

    def test_unit_temperature_is_softmax(self):
        logits = np.array([[1.0, 2.0, 0.5], [0.0, -1.0, 3.0]])

        np.testing.assert_allclose(apply_temperature(1.0, logits), special.softmax(logits, axis=1))

    def test_large_temperature_flattens(self):
        probs = apply_temperature(1e6, [[5.0, -3.0, 1.0, 0.0]])

        np.testing.assert_allclose(probs, np.full((1, 4), 0.25), atol=1e-5)

    def test_large_logits_are_stable(self):
        probs = apply_temperature(1.0, [1000.0, 0.0])

        np.testing.assert_allclose(probs, [1.0, 0.0])

    @pytest.mark.parametrize("temperature", [0.1, 1.0, 10.0])
    def test_preserves_argmax(self, temperature):
        logits = np.random.default_rng(8).normal(0.0, 3.0, size=(1000, 7))

        probs = apply_temperature(temperature, logits)

        np.testing.assert_array_equal(probs.argmax(axis=1), logits.argmax(axis=1))
        np.testing.assert_allclose(probs.sum(axis=1), 1.0)

    def test_accepts_model(self):
        model = TemperatureModel(temperature=2.0, nll_before=1.0, nll_after=0.9)

        np.testing.assert_allclose(apply_temperature(model, [2.0, 0.0]), special.softmax([1.0, 0.0]))

    def test_fitted_nll_cannot_exceed_baseline(self):
        with pytest.raises(ValidationError):
            TemperatureModel(temperature=2.0, nll_before=0.5, nll_after=0.9)


# ============================================================================
# Isotonic Regression
# ============================================================================


class TestFitIsotonic:
    """Test the pool-adjacent-violators map."""

    def test_pools_violators(self):
        confidences = [0.2, 0.4, 0.6, 0.8] * 3
        correct = [1, 0, 1, 1] * 3

        model = fit_isotonic(confidences, correct)

        assert model.breakpoints == pytest.approx([0.2, 0.4, 0.6, 0.8])
        assert model.values == pytest.approx([0.5, 0.5, 1.0, 1.0])
        assert model.n_samples == 12

    def test_step_lookup(self):
        model = fit_isotonic([0.2, 0.4, 0.6, 0.8] * 3, [1, 0, 1, 1] * 3)

        assert model(0.3) == pytest.approx(0.5)
        assert model(0.1) == pytest.approx(0.5)
        assert model(0.7) == pytest.approx(1.0)
        np.testing.assert_allclose(model([0.2, 0.9]), [0.5, 1.0])

    def test_all_correct_is_constant(self):
        model = fit_isotonic(np.linspace(0.1, 0.9, 12), [1] * 12)

        assert set(model.values) == {1.0}

    def test_output_is_monotone(self):
        rng = np.random.default_rng(8)
        confidences = rng.random(300)
        correct = rng.random(300) < confidences

        values = fit_isotonic(confidences, correct).values

        assert values == sorted(values)

    def test_rejects_small_sample(self):
        with pytest.raises(CalibrationFitError) as exc:
            fit_isotonic([0.5] * 3, [1] * 3)

        assert exc.value.details["method"] == "isotonic"

    def test_rejects_out_of_range(self):
        with pytest.raises(CalibrationFitError):
            fit_isotonic([1.5] + [0.5] * 11, [1] * 12)

    def test_decreasing_model_rejected(self):
        with pytest.raises(ValidationError):
            IsotonicModel(breakpoints=[0.0, 1.0], values=[0.8, 0.2])


# ============================================================================
# Bundle
# ============================================================================


def _validation_samples(n: int = 20, split: Split = Split.VAL) -> list[CalibrationSample]:
    samples = []
    for i in range(n):
        true = FaultClass.NORMAL if i % 2 == 0 else FaultClass.IMBALANCE
        rule = true if i % 5 else FaultClass.LOOSENESS
        probs = np.full(len(CANONICAL_CLASSES), 0.05)
        probs[CANONICAL_CLASSES.index(rule)] = 0.7
        samples.append(
            CalibrationSample(
                sample_id=f"{true.value}_{i:04d}",
                split=split,
                true_label=true,
                log_scores=np.log(probs).tolist(),
                rule_label=rule,
                rule_confidence=0.5 + 0.02 * i,
                llm_label=true if i % 4 else None,
                llm_confidence=0.2 + 0.04 * i if i % 4 else None,
            )
        )
    return samples


class TestCalibratePipeline:
    """Test fitting the bundle on validation outcomes."""

    def test_fits_every_map(self):
        bundle = calibrate_pipeline(_validation_samples())

        assert bundle.fit_split == Split.VAL
        assert len(bundle.fit_sample_ids) == 20
        assert bundle.isotonic is not None
        assert bundle.isotonic.n_samples == 15
        assert bundle.rule_isotonic is not None
        assert bundle.classes == list(CANONICAL_CLASSES)

    def test_without_verdicts(self):
        samples = [s._replace(llm_label=None, llm_confidence=None) for s in _validation_samples()]

        bundle = calibrate_pipeline(samples)

        assert bundle.isotonic is None
        assert bundle.llm_confidence(0.6) == 0.6

    def test_test_split_rejected(self):
        samples = _validation_samples() + _validation_samples(2, Split.TEST)

        with pytest.raises(DataLeakageError) as exc:
            calibrate_pipeline(samples)

        assert exc.value.details["n_leaked"] == 2

    def test_empty(self):
        with pytest.raises(CalibrationFitError):
            calibrate_pipeline([])


class TestCalibrateModelClassOrder:
    """Test that labels are indexed in the rule model's class order, not the canonical one."""

    MODEL_CLASSES = [FaultClass.IMBALANCE, FaultClass.NORMAL]

    def _samples(self, n: int = 30) -> list[CalibrationSample]:
        samples = []
        for i in range(n):
            true = self.MODEL_CLASSES[i % 2]
            # right four times in five, with log-odds of 2
            predicted = true if i % 5 else self.MODEL_CLASSES[(i + 1) % 2]
            scores = [0.0, 0.0]
            scores[self.MODEL_CLASSES.index(predicted)] = 2.0
            samples.append(
                CalibrationSample(
                    sample_id=f"{true.value}_{i:04d}",
                    split=Split.VAL,
                    true_label=true,
                    log_scores=scores,
                    rule_label=predicted,
                    rule_confidence=float(special.softmax(scores).max()),
                    classes=self.MODEL_CLASSES,
                )
            )
        return samples

    def test_temperature_uses_model_positions(self):
        samples = self._samples()
        expected = fit_temperature(
            [s.log_scores for s in samples],
            [self.MODEL_CLASSES.index(s.true_label) for s in samples],
        )

        bundle = calibrate_pipeline(samples)

        assert bundle.temperature.temperature == pytest.approx(expected.temperature)
        assert bundle.classes == self.MODEL_CLASSES
        # mostly-right scores must not look anti-calibrated
        assert bundle.temperature.nll_before < np.log(2.0)

    def test_unlearned_class_left_out(self):
        samples = self._samples()
        stray = samples[0]._replace(sample_id="gear_fault_0099", true_label=FaultClass.GEAR_FAULT)

        bundle = calibrate_pipeline(samples + [stray])

        assert bundle.temperature.n_samples == len(samples)
        assert "gear_fault_0099" in bundle.fit_sample_ids

    def test_mixed_orders_rejected(self):
        samples = self._samples()
        samples[3] = samples[3]._replace(classes=list(reversed(self.MODEL_CLASSES)))

        with pytest.raises(CalibrationFitError):
            calibrate_pipeline(samples)


class TestCalibrationBundle:
    """Test bundle lookups and leakage checks."""

    def test_disjoint_test_ids_pass(self):
        _identity_bundle().assert_no_leakage(["normal_0100", "imbalance_0101"])

    def test_overlapping_ids(self):
        with pytest.raises(DataLeakageError) as exc:
            _identity_bundle().assert_no_leakage(["imbalance_0002", "normal_0100"])

        assert exc.value.details["leaked_ids"] == ["imbalance_0002"]
        assert "1 test-split samples" in exc.value.message

    def test_wrong_fit_split(self):
        with pytest.raises(DataLeakageError) as exc:
            _identity_bundle(fit_split=Split.TEST).assert_no_leakage([])

        assert "only 'val' is allowed" in exc.value.message

    def test_rule_confidence_at_unit_temperature(self):
        log_scores = np.log([0.7] + [0.05] * 6)

        assert _identity_bundle().rule_confidence(log_scores) == pytest.approx(0.7)

    def test_identity_maps_without_isotonic(self):
        bundle = _identity_bundle()

        assert bundle.llm_confidence(0.8) == 0.8
        assert bundle.rule_confidence_isotonic(0.3) == 0.3
