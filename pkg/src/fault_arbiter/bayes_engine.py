"""
Naive Bayes diagnostic engine.

The engine reads the features named in BayesSettings.features (by default
the time-domain statistics and spectral summaries). Continuous features use
class-conditional Gaussians fitted by maximum likelihood. Features listed in
BayesSettings.discretize are binned into equal-width intervals over the
training range and modelled with Laplace-smoothed tables:

    P(bin j | class m) = (N(m, j) + alpha) / (N(m) + alpha * J)

The posterior is computed in log space and normalized with log-sum-exp.
The unnormalized log posteriors (log prior + log likelihood) are kept as
log_scores; calibration treats them as logits.
"""

import logging
from collections import Counter
from collections.abc import Sequence
from pathlib import Path

import numpy as np
from pydantic import BaseModel, Field, ValidationError, model_validator
from scipy import special, stats

from fault_arbiter.exceptions import (
    ConfigurationError,
    InputValidationError,
    PersistenceError,
    create_insufficient_data_error,
)
from fault_arbiter.params import MODEL_FORMAT_VERSION
from fault_arbiter.schemas.diagnosis_schema import Diagnosis
from fault_arbiter.schemas.enums import CANONICAL_CLASSES, FaultClass
from fault_arbiter.schemas.feature_schema import FEATURE_NAMES, FeatureVector
from fault_arbiter.schemas.settings_schema import BayesSettings


logger = logging.getLogger(__name__)


MIN_SAMPLES_PER_CLASS = 2


# === Model ===


class GaussianParams(BaseModel):
    """Per-class mean and variance of one continuous feature (class order)."""

    means: list[float]
    variances: list[float]


class DiscreteTable(BaseModel):
    """Bin edges and per-class bin probabilities of one discretized feature."""

    edges: list[float]
    probabilities: list[list[float]] = Field(..., description="[class][bin]")


class NaiveBayesModel(BaseModel):
    """Fitted Naive Bayes parameters. Immutable once fitted."""

    format_version: int = MODEL_FORMAT_VERSION
    classes: list[FaultClass]
    feature_names: list[str]
    priors: list[float]
    gaussian_params: dict[str, GaussianParams] = Field(default_factory=dict)
    discrete_tables: dict[str, DiscreteTable] = Field(default_factory=dict)
    alpha: float = 1.0
    bins: int = 4
    variance_floors: dict[str, float] = Field(default_factory=dict)

    @model_validator(mode="after")
    def validate_parameters(self) -> "NaiveBayesModel":
        n_classes = len(self.classes)
        if len(self.priors) != n_classes or abs(sum(self.priors) - 1.0) > 1e-9:
            raise ValueError("priors must have one entry per class and sum to 1")
        for name, params in self.gaussian_params.items():
            floor = self.variance_floors.get(name, 0.0)
            if len(params.means) != n_classes or len(params.variances) != n_classes:
                raise ValueError(f"gaussian parameters for '{name}' do not match the class list")
            if any(v < floor for v in params.variances):
                raise ValueError(f"variance of '{name}' below its floor")
        for name, table in self.discrete_tables.items():
            if len(table.probabilities) != n_classes:
                raise ValueError(f"table for '{name}' does not match the class list")
            if any(abs(sum(row) - 1.0) > 1e-9 for row in table.probabilities):
                raise ValueError(f"table rows for '{name}' must sum to 1")
        missing = set(self.feature_names) - set(self.gaussian_params) - set(self.discrete_tables)
        if missing:
            raise ValueError(f"features without parameters: {', '.join(sorted(missing))}")
        return self


# === Fitting ===


def _bin_index(values: np.ndarray, edges: np.ndarray) -> np.ndarray:
    """Bin of each value; out-of-range values fall into the nearest edge bin."""
    return np.digitize(values, edges[1:-1])


def _priors(classes: list[FaultClass], counts: Counter, settings: BayesSettings) -> np.ndarray:
    if settings.prior_override is None:
        weights = np.array([counts[c] for c in classes], dtype=float)
    else:
        missing = [c.value for c in classes if c not in settings.prior_override]
        if missing:
            raise ConfigurationError(
                f"prior_override is missing classes: {', '.join(missing)}",
                config_key="bayes.prior_override",
            )
        weights = np.array([settings.prior_override[c] for c in classes], dtype=float)
        if weights.sum() <= 0:
            raise ConfigurationError(
                "prior_override gives zero weight to every trained class",
                config_key="bayes.prior_override",
            )
    return weights / weights.sum()


def fit_arrays(
    X: np.ndarray,
    labels: Sequence[FaultClass],
    feature_names: Sequence[str],
    settings: BayesSettings | None = None,
) -> NaiveBayesModel:
    """
    Fit a model on a plain feature matrix.

    Args:
        X: (n_samples, n_features) matrix, columns in feature_names order
        labels: Class of each row
        feature_names: Column names; names listed in settings.discretize use tables
        settings: Smoothing, binning, variance floor and prior settings

    Returns:
        Fitted NaiveBayesModel over the classes present, in canonical order

    Raises:
        InsufficientDataError: If any present class has fewer than 2 samples
        InputValidationError: If X is malformed or contains non-finite values
    """
    settings = settings or BayesSettings()
    X = np.asarray(X, dtype=float)
    feature_names = list(feature_names)
    if X.ndim != 2 or X.shape[0] != len(labels) or X.shape[1] != len(feature_names):
        raise InputValidationError(
            f"Feature matrix shape {X.shape} does not match {len(labels)} labels "
            f"and {len(feature_names)} features",
            field="X",
        )
    if not np.all(np.isfinite(X)):
        raise InputValidationError("Feature matrix contains non-finite values", field="X")

    counts = Counter(labels)
    classes = [c for c in CANONICAL_CLASSES if counts[c] > 0]
    if not classes or any(counts[c] < MIN_SAMPLES_PER_CLASS for c in classes):
        raise create_insufficient_data_error(
            "naive bayes fit",
            {c.value: counts[c] for c in classes},
            MIN_SAMPLES_PER_CLASS,
        )

    label_arr = np.array([c.value for c in labels])
    masks = [label_arr == c.value for c in classes]

    gaussian_params: dict[str, GaussianParams] = {}
    discrete_tables: dict[str, DiscreteTable] = {}
    variance_floors: dict[str, float] = {}

    for j, name in enumerate(feature_names):
        column = X[:, j]
        if name in settings.discretize:
            low, high = float(column.min()), float(column.max())
            if high == low:
                low, high = low - 0.5, high + 0.5
            edges = np.linspace(low, high, settings.bins + 1)
            bins = _bin_index(column, edges)
            rows = []
            for mask in masks:
                bin_counts = np.bincount(bins[mask], minlength=settings.bins).astype(float)
                rows.append(
                    ((bin_counts + settings.alpha) / (mask.sum() + settings.alpha * settings.bins)).tolist()
                )
            discrete_tables[name] = DiscreteTable(edges=edges.tolist(), probabilities=rows)
        else:
            floor = max(settings.variance_floor_scale * float(column.var()), settings.variance_floor_min)
            variance_floors[name] = floor
            gaussian_params[name] = GaussianParams(
                means=[float(column[mask].mean()) for mask in masks],
                variances=[max(float(column[mask].var()), floor) for mask in masks],
            )

    model = NaiveBayesModel(
        classes=classes,
        feature_names=feature_names,
        priors=_priors(classes, counts, settings).tolist(),
        gaussian_params=gaussian_params,
        discrete_tables=discrete_tables,
        alpha=settings.alpha,
        bins=settings.bins,
        variance_floors=variance_floors,
    )
    logger.info(
        f"Fitted naive bayes on {X.shape[0]} samples, {len(classes)} classes, "
        f"{len(discrete_tables)} discretized features",
        extra={"n_samples": X.shape[0], "classes": [c.value for c in classes]},
    )
    return model


def fit(
    samples: Sequence[tuple[FeatureVector, FaultClass]], settings: BayesSettings | None = None
) -> NaiveBayesModel:
    """Fit on (FeatureVector, label) pairs using the features named in settings.features."""
    settings = settings or BayesSettings()
    if not samples:
        raise create_insufficient_data_error("naive bayes fit", {}, MIN_SAMPLES_PER_CLASS)
    names = [name for name in FEATURE_NAMES if name in settings.features]
    X = np.array([[float(getattr(features, name)) for name in names] for features, _ in samples])
    return fit_arrays(X, [label for _, label in samples], names, settings)


# === Inference ===


def _feature_values(model: NaiveBayesModel, features: FeatureVector | Sequence[float]) -> np.ndarray:
    if isinstance(features, FeatureVector):
        values = np.array([float(getattr(features, name)) for name in model.feature_names])
    else:
        values = np.asarray(features, dtype=float)
        if values.shape != (len(model.feature_names),):
            raise InputValidationError(
                f"Expected {len(model.feature_names)} feature values, got shape {values.shape}",
                field="features",
            )
    if not np.all(np.isfinite(values)):
        raise InputValidationError("Feature values must be finite", field="features")
    return values


def posterior(
    model: NaiveBayesModel, features: FeatureVector | Sequence[float]
) -> tuple[np.ndarray, np.ndarray]:
    """
    Class posterior for one feature vector.

    Args:
        model: Fitted model
        features: FeatureVector, or raw values in model.feature_names order

    Returns:
        (posteriors, log_scores) in model.classes order

    Raises:
        InputValidationError: On non-finite input, or when every class has
            zero likelihood
    """
    values = _feature_values(model, features)

    with np.errstate(divide="ignore"):
        log_scores = np.log(np.asarray(model.priors))
        for value, name in zip(values, model.feature_names):
            if name in model.gaussian_params:
                params = model.gaussian_params[name]
                log_scores = log_scores + stats.norm.logpdf(
                    value, loc=np.asarray(params.means), scale=np.sqrt(params.variances)
                )
            else:
                table = model.discrete_tables[name]
                j = int(_bin_index(np.array([value]), np.asarray(table.edges))[0])
                log_scores = log_scores + np.log([row[j] for row in table.probabilities])

    if not np.any(np.isfinite(log_scores)):
        raise InputValidationError(
            "Every class has zero likelihood for this input", field="features"
        )

    posteriors = np.exp(log_scores - special.logsumexp(log_scores))
    posteriors /= posteriors.sum()
    return posteriors, log_scores


def diagnose(model: NaiveBayesModel, features: FeatureVector | Sequence[float]) -> Diagnosis:
    """
    Preliminary diagnosis: argmax class and its posterior.

    Ties resolve to the first class in canonical order.
    """
    posteriors, log_scores = posterior(model, features)
    idx = int(np.argmax(log_scores))
    return Diagnosis(
        label=model.classes[idx],
        confidence=float(posteriors[idx]),
        classes=list(model.classes),
        posteriors=posteriors.tolist(),
        log_scores=log_scores.tolist(),
    )


def diagnose_many(
    model: NaiveBayesModel, batch: Sequence[FeatureVector | Sequence[float]]
) -> list[Diagnosis]:
    """Diagnose a batch, preserving order."""
    return [diagnose(model, features) for features in batch]


# === Serialization ===


def save_model(model: NaiveBayesModel, path: Path) -> Path:
    """Write the model as versioned JSON (shortest round-trip float repr)."""
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(model.model_dump_json(indent=2), encoding="utf-8")
    except OSError as exc:
        raise PersistenceError(f"Could not write model: {exc}", str(path), exc) from exc
    return path


def load_model(path: Path) -> NaiveBayesModel:
    """
    Read a model written by save_model.

    Raises:
        PersistenceError: If the file is missing, malformed or of another format version
    """
    try:
        model = NaiveBayesModel.model_validate_json(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise PersistenceError(f"Could not read model: {exc}", str(path), exc) from exc
    except ValidationError as exc:
        raise PersistenceError(f"Malformed model file: {exc.errors()[0]['msg']}", str(path), exc) from exc
    if model.format_version != MODEL_FORMAT_VERSION:
        raise PersistenceError(
            f"Model format version {model.format_version} is not supported "
            f"(expected {MODEL_FORMAT_VERSION})",
            str(path),
        )
    return model
