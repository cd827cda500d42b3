"""
Confidence calibration.

Temperature scaling for the rule engine's log-posterior vector and isotonic
regression for scalar confidences (the arbiter's vote share, and the rule
confidence as a comparison map). Both are fitted on the validation split
only; the resulting CalibrationBundle records which samples it saw.
"""

import logging
from typing import NamedTuple, Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy import special
from scipy.optimize import minimize_scalar
from sklearn.isotonic import IsotonicRegression

from fault_arbiter.exceptions import CalibrationFitError, create_leakage_error
from fault_arbiter.params import BUNDLE_FORMAT_VERSION, PROBABILITY_FLOOR
from fault_arbiter.schemas.enums import CANONICAL_CLASSES, FaultClass, Split
from fault_arbiter.schemas.settings_schema import CalibrationSettings


logger = logging.getLogger(__name__)


MIN_CALIBRATION_SAMPLES = 10


# === Temperature Scaling ===


class TemperatureModel(BaseModel):
    """Fitted temperature with validation diagnostics."""

    model_config = ConfigDict(frozen=True)

    temperature: float = Field(..., gt=0)
    nll_before: float = Field(..., description="Validation NLL at T = 1")
    nll_after: float = Field(..., description="Validation NLL at the fitted T")
    iterations: int = Field(0, description="Objective evaluations spent in refinement")
    n_samples: int = 0

    @model_validator(mode="after")
    def validate_improvement(self) -> "TemperatureModel":
        if self.nll_after > self.nll_before + 1e-9:
            raise ValueError("fitted temperature must not increase validation NLL")
        return self


def _logit_inputs(logits, labels) -> tuple[np.ndarray, np.ndarray]:
    z = np.atleast_2d(np.asarray(logits, dtype=float))
    y = np.asarray(labels, dtype=int).ravel()
    if z.shape[0] != y.size:
        raise CalibrationFitError(
            f"{z.shape[0]} logit vectors but {y.size} labels", method="temperature"
        )
    if y.size < MIN_CALIBRATION_SAMPLES:
        raise CalibrationFitError(
            f"Temperature scaling needs at least {MIN_CALIBRATION_SAMPLES} samples, got {y.size}",
            method="temperature",
        )
    # -inf marks a class ruled out by a zero prior; it stays -inf under any T
    if np.any(np.isnan(z)) or np.any(np.isposinf(z)) or np.any(np.all(np.isneginf(z), axis=1)):
        raise CalibrationFitError("Logits must be finite or -inf", method="temperature")
    if y.min() < 0 or y.max() >= z.shape[1]:
        raise CalibrationFitError("Label index out of range", method="temperature")
    if np.unique(y).size < 2:
        raise CalibrationFitError("Only one class present in the calibration set", method="temperature")
    return z, y


def _nll_at(z: np.ndarray, y: np.ndarray, temperature: float) -> float:
    with np.errstate(invalid="ignore"):
        log_probs = special.log_softmax(z / temperature, axis=1)
    picked = log_probs[np.arange(y.size), y]
    return float(-np.mean(np.maximum(picked, np.log(PROBABILITY_FLOOR))))


def fit_temperature(logits, labels, settings: Optional[CalibrationSettings] = None) -> TemperatureModel:
    """
    Fit T by minimizing validation NLL of softmax(z / T).

    A log-spaced grid over settings.temperature_bounds (plus T = 1) locates
    the basin; a golden-section search over the bracket formed by the best
    grid point and its neighbours refines it. The returned T is the best of
    the refined point, the best grid point and T = 1, so the fit never
    increases NLL.

    Args:
        logits: (N, C) log-score vectors
        labels: N true class indices
        settings: Search bounds, grid size and tolerance

    Raises:
        CalibrationFitError: On fewer than 10 samples, invalid logits or a
            single class present
    """
    settings = settings or CalibrationSettings()
    z, y = _logit_inputs(logits, labels)
    low, high = settings.temperature_bounds

    grid = np.union1d(np.geomspace(low, high, settings.grid_points), [1.0])
    losses = np.array([_nll_at(z, y, t) for t in grid])
    best = int(np.argmin(losses))

    candidates = [(float(losses[best]), float(grid[best]))]
    iterations = 0
    # golden section needs an interior minimum strictly below both neighbours
    if 0 < best < grid.size - 1 and losses[best] < min(losses[best - 1], losses[best + 1]):
        result = minimize_scalar(
            lambda t: _nll_at(z, y, t),
            bracket=(grid[best - 1], grid[best], grid[best + 1]),
            method="golden",
            options={"xtol": settings.tolerance},
        )
        refined = float(np.clip(result.x, grid[best - 1], grid[best + 1]))
        candidates.append((_nll_at(z, y, refined), refined))
        iterations = int(result.nfev)

    nll_before = _nll_at(z, y, 1.0)
    candidates.append((nll_before, 1.0))
    nll_after, temperature = min(candidates)

    logger.info(
        f"Fitted temperature T={temperature:.4f} (NLL {nll_before:.4f} -> {nll_after:.4f})",
        extra={"temperature": temperature, "n_samples": int(y.size)},
    )
    return TemperatureModel(
        temperature=temperature,
        nll_before=nll_before,
        nll_after=nll_after,
        iterations=iterations,
        n_samples=int(y.size),
    )


def apply_temperature(model: TemperatureModel | float, logits) -> np.ndarray:
    """softmax(z / T) row-wise; max-subtracted, so large logits are safe."""
    temperature = model.temperature if isinstance(model, TemperatureModel) else float(model)
    z = np.asarray(logits, dtype=float)
    return special.softmax(z / temperature, axis=-1)


# === Isotonic Regression ===


class IsotonicModel(BaseModel):
    """Nondecreasing step function from raw confidence to calibrated confidence."""

    model_config = ConfigDict(frozen=True)

    breakpoints: list[float] = Field(..., min_length=1)
    values: list[float] = Field(..., min_length=1)
    n_samples: int = 0

    @model_validator(mode="after")
    def validate_monotone(self) -> "IsotonicModel":
        if len(self.breakpoints) != len(self.values):
            raise ValueError("breakpoints and values must have equal length")
        if any(b > a for a, b in zip(self.values[1:], self.values)):
            raise ValueError("values must be nondecreasing")
        if min(self.values) < 0.0 or max(self.values) > 1.0:
            raise ValueError("values must lie in [0, 1]")
        return self

    def __call__(self, confidences):
        x = np.asarray(confidences, dtype=float)
        index = np.clip(np.searchsorted(self.breakpoints, x, side="right") - 1, 0, len(self.values) - 1)
        mapped = np.asarray(self.values)[index]
        return float(mapped) if mapped.ndim == 0 else mapped


def fit_isotonic(confidences, correct) -> IsotonicModel:
    """
    Pool-adjacent-violators fit of correctness against confidence.

    Raises:
        CalibrationFitError: On fewer than 10 samples, mismatched lengths or
            confidences outside [0, 1]
    """
    x = np.asarray(confidences, dtype=float).ravel()
    y = np.asarray(correct, dtype=float).ravel()
    if x.shape != y.shape:
        raise CalibrationFitError(f"{x.size} confidences but {y.size} correctness flags", method="isotonic")
    if x.size < MIN_CALIBRATION_SAMPLES:
        raise CalibrationFitError(
            f"Isotonic calibration needs at least {MIN_CALIBRATION_SAMPLES} samples, got {x.size}",
            method="isotonic",
        )
    if not np.all(np.isfinite(x)) or x.min() < 0.0 or x.max() > 1.0:
        raise CalibrationFitError("Confidences must lie in [0, 1]", method="isotonic")

    regression = IsotonicRegression(y_min=0.0, y_max=1.0, increasing=True, out_of_bounds="clip")
    regression.fit(x, y)
    breakpoints = np.unique(x)
    values = np.clip(regression.predict(breakpoints), 0.0, 1.0)
    return IsotonicModel(breakpoints=breakpoints.tolist(), values=values.tolist(), n_samples=int(x.size))


# === Bundle ===


class CalibrationSample(NamedTuple):
    """What calibration needs from one arbitrated case."""

    sample_id: str
    split: Split
    true_label: FaultClass
    log_scores: Sequence[float]
    rule_label: FaultClass
    rule_confidence: float
    llm_label: Optional[FaultClass] = None
    llm_confidence: Optional[float] = None
    # order of log_scores; canonical when omitted
    classes: Optional[Sequence[FaultClass]] = None


class CalibrationBundle(BaseModel):
    """Per-source calibrators fitted on the validation split."""

    model_config = ConfigDict(frozen=True)

    format_version: int = BUNDLE_FORMAT_VERSION
    classes: list[FaultClass] = Field(default_factory=lambda: list(CANONICAL_CLASSES))
    temperature: TemperatureModel
    isotonic: Optional[IsotonicModel] = Field(None, description="Arbiter vote-share map")
    rule_isotonic: Optional[IsotonicModel] = Field(None, description="Rule confidence map (comparison)")
    dirichlet: None = Field(None, description="Reserved; Dirichlet calibration is not fitted")
    fit_split: Split = Split.VAL
    fit_sample_ids: list[str] = Field(default_factory=list)

    def assert_no_leakage(self, test_ids: Sequence[str]) -> None:
        """
        Raises:
            DataLeakageError: If the bundle was fit outside the validation
                split or saw any of test_ids
        """
        if self.fit_split != Split.VAL:
            raise create_leakage_error([], self.fit_split.value)
        leaked = sorted(set(self.fit_sample_ids) & set(test_ids))
        if leaked:
            raise create_leakage_error(leaked, self.fit_split.value)

    def rule_probabilities(self, log_scores) -> np.ndarray:
        return apply_temperature(self.temperature, log_scores)

    def rule_confidence(self, log_scores) -> float:
        """Max of the temperature-scaled posteriors."""
        return float(np.max(self.rule_probabilities(log_scores)))

    def rule_confidence_isotonic(self, confidence: float) -> float:
        return self.rule_isotonic(confidence) if self.rule_isotonic else confidence

    def llm_confidence(self, vote_share: float) -> float:
        """Isotonic map of the vote share; identity when no arbiter map was fitted."""
        return self.isotonic(vote_share) if self.isotonic else vote_share


def calibrate_pipeline(
    samples: Sequence[CalibrationSample], settings: Optional[CalibrationSettings] = None
) -> CalibrationBundle:
    """
    Fit the calibration bundle from validation outcomes.

    The temperature is fitted on the rule log-scores, the arbiter map on
    vote shares of cases with a verdict, and the rule isotonic map on the
    rule confidences.

    Raises:
        DataLeakageError: If any sample is not from the validation split
        CalibrationFitError: If validation data is missing or too small
    """
    outside = [s.sample_id for s in samples if s.split != Split.VAL]
    if outside:
        raise create_leakage_error(outside, "+".join(sorted({s.split.value for s in samples})))
    if not samples:
        raise CalibrationFitError("No validation samples to calibrate on", method="bundle")

    classes = list(samples[0].classes or CANONICAL_CLASSES)
    if any(list(s.classes or CANONICAL_CLASSES) != classes for s in samples):
        raise CalibrationFitError("Validation log-scores disagree on the class order", method="temperature")
    # a class the rule engine never learned has no logit to calibrate against
    scored = [s for s in samples if s.true_label in classes]
    if len(scored) < len(samples):
        logger.warning(
            f"{len(samples) - len(scored)} validation samples have a class outside the rule model; "
            "left out of the temperature fit",
            extra={"n_dropped": len(samples) - len(scored)},
        )
    temperature = fit_temperature(
        [list(s.log_scores) for s in scored],
        [classes.index(s.true_label) for s in scored],
        settings,
    )
    rule_isotonic = fit_isotonic(
        [s.rule_confidence for s in samples],
        [s.rule_label == s.true_label for s in samples],
    )

    judged = [s for s in samples if s.llm_label is not None and s.llm_confidence is not None]
    isotonic = None
    if judged:
        isotonic = fit_isotonic(
            [s.llm_confidence for s in judged],
            [s.llm_label == s.true_label for s in judged],
        )
    else:
        logger.warning("No arbiter verdicts on the validation split; vote shares stay uncalibrated")

    logger.info(
        f"Calibration bundle fitted on {len(samples)} validation samples",
        extra={"n_samples": len(samples), "n_judged": len(judged)},
    )
    return CalibrationBundle(
        classes=classes,
        temperature=temperature,
        isotonic=isotonic,
        rule_isotonic=rule_isotonic,
        fit_split=Split.VAL,
        fit_sample_ids=[s.sample_id for s in samples],
    )
