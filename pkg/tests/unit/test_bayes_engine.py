"""
Tests for the Naive Bayes diagnostic engine (bayes_engine.py).
"""

import itertools
import json

import numpy as np
import pytest

from fault_arbiter.bayes_engine import (
    diagnose,
    diagnose_many,
    fit,
    fit_arrays,
    load_model,
    posterior,
    save_model,
)
from fault_arbiter.exceptions import (
    ConfigurationError,
    InputValidationError,
    InsufficientDataError,
    PersistenceError,
)
from fault_arbiter.schemas.enums import CANONICAL_CLASSES, FaultClass
from fault_arbiter.schemas.feature_schema import FEATURE_NAMES
from fault_arbiter.schemas.settings_schema import RULE_ENGINE_FEATURES, BayesSettings


IMB, NORM = FaultClass.IMBALANCE, FaultClass.NORMAL

# every feature Gaussian
GAUSSIAN = BayesSettings(discretize=[])

# two discretized features over the integer levels 0..3
TABLE_FEATURES = ["harmonic_count", "env_peak_freq"]


def _exhaustive_posteriors(rows: dict, query: tuple[int, ...], alpha: float = 1.0, bins: int = 4) -> np.ndarray:
    """Prior times smoothed per-feature frequencies, normalized, evaluated directly from the rows."""
    n_total = sum(len(r) for r in rows.values())
    expected = []
    for c in rows:
        n_c = len(rows[c])
        p = n_c / n_total
        for j, level in enumerate(query):
            hits = sum(1 for r in rows[c] if r[j] == level)
            p *= (hits + alpha) / (n_c + alpha * bins)
        expected.append(p)
    return np.array(expected) / sum(expected)


def _fit_rows(rows: dict, alpha: float = 1.0):
    X = [values for c in rows for values in rows[c]]
    labels = [c for c in rows for _ in rows[c]]
    settings = BayesSettings(features=TABLE_FEATURES, discretize=TABLE_FEATURES, bins=4, alpha=alpha)
    return fit_arrays(np.asarray(X, dtype=float), labels, TABLE_FEATURES, settings)


class TestFit:
    """Test parameter estimation."""

    def test_degenerate_variance_uses_floor(self):
        """Test that constant per-class columns fall back to the variance floor."""
        model = fit_arrays([[0.0], [0.0], [10.0], [10.0]], [NORM, NORM, IMB, IMB], ["rms"], GAUSSIAN)

        params = model.gaussian_params["rms"]
        assert model.classes == [IMB, NORM]
        assert params.means == [10.0, 0.0]
        assert params.variances == [pytest.approx(2.5e-5), pytest.approx(2.5e-5)]
        assert model.variance_floors["rms"] == pytest.approx(2.5e-5)

    def test_balanced_priors(self):
        labels = [c for c in CANONICAL_CLASSES for _ in range(2)]
        X = np.arange(len(labels), dtype=float).reshape(-1, 1)

        model = fit_arrays(X, labels, ["rms"], GAUSSIAN)

        assert model.classes == list(CANONICAL_CLASSES)
        assert model.priors == pytest.approx([1 / 7] * 7, abs=1e-9)

    def test_laplace_smoothing(self):
        """Test (0 + alpha) / (N + alpha * J) for an empty bin."""
        X = [[0.0]] * 10 + [[10.0]] * 10
        labels = [NORM] * 10 + [IMB] * 10
        settings = BayesSettings(discretize=["harmonic_count"], bins=4, alpha=1.0)

        model = fit_arrays(X, labels, ["harmonic_count"], settings)

        table = model.discrete_tables["harmonic_count"]
        normal_row = table.probabilities[model.classes.index(NORM)]
        assert normal_row == pytest.approx([11 / 14, 1 / 14, 1 / 14, 1 / 14])
        assert table.edges == pytest.approx([0.0, 2.5, 5.0, 7.5, 10.0])

    def test_prior_override(self):
        settings = BayesSettings(prior_override={IMB: 3.0, NORM: 1.0})

        model = fit_arrays([[0.0], [1.0], [5.0], [6.0]], [NORM, NORM, IMB, IMB], ["rms"], settings)

        assert model.priors == pytest.approx([0.75, 0.25])

    def test_prior_override_missing_class(self):
        settings = BayesSettings(prior_override={IMB: 1.0})

        with pytest.raises(ConfigurationError) as exc:
            fit_arrays([[0.0], [1.0], [5.0], [6.0]], [NORM, NORM, IMB, IMB], ["rms"], settings)

        assert exc.value.details["config_key"] == "bayes.prior_override"

    def test_class_with_one_sample(self):
        """Test that an under-populated class is reported with its count."""
        with pytest.raises(InsufficientDataError) as exc:
            fit_arrays([[0.0], [1.0], [5.0]], [NORM, NORM, IMB], ["rms"], GAUSSIAN)

        assert exc.value.details["counts"] == {"imbalance": 1, "normal": 2}
        assert exc.value.details["required"] == 2

    def test_empty_samples(self):
        with pytest.raises(InsufficientDataError):
            fit([])

    def test_non_finite_matrix(self):
        with pytest.raises(InputValidationError):
            fit_arrays([[np.inf], [1.0], [5.0], [6.0]], [NORM, NORM, IMB, IMB], ["rms"], GAUSSIAN)

    def test_fit_on_feature_vectors(self, make_features):
        samples = [
            (make_features(rms=0.70), NORM),
            (make_features(rms=0.72), NORM),
            (make_features(rms=2.10, a1x=3.0), IMB),
            (make_features(rms=2.14, a1x=2.9), IMB),
        ]

        model = fit(samples, BayesSettings(features=list(FEATURE_NAMES), discretize=[]))

        assert model.feature_names == list(FEATURE_NAMES)
        assert diagnose(model, make_features(rms=2.12, a1x=2.95)).label == IMB

    def test_default_knowledge_base(self, make_features):
        """Test that the default engine bins the time-domain and spectral-summary features only."""
        samples = [
            (make_features(rms=0.70), NORM),
            (make_features(rms=0.72), NORM),
            (make_features(rms=2.10, a1x=3.0), IMB),
            (make_features(rms=2.14, a1x=2.9), IMB),
        ]

        model = fit(samples)

        assert model.feature_names == list(RULE_ENGINE_FEATURES)
        assert set(model.discrete_tables) == set(RULE_ENGINE_FEATURES)
        assert model.gaussian_params == {}
        result = diagnose(model, make_features(rms=2.12))
        assert result.label == IMB
        assert result.confidence == pytest.approx(0.75)


class TestPosterior:
    """Test posterior computation and diagnosis."""

    def test_separated_gaussians(self):
        """Test N(0, 1) vs N(10, 1) queried at 0."""
        model = fit_arrays([[-1.0], [1.0], [9.0], [11.0]], [NORM, NORM, IMB, IMB], ["rms"], GAUSSIAN)

        posteriors, log_scores = posterior(model, [0.0])

        assert posteriors[model.classes.index(NORM)] > 0.999
        assert posteriors.sum() == pytest.approx(1.0, abs=1e-9)
        assert log_scores.shape == (2,)

    def test_symmetric_tie_resolves_to_canonical_order(self):
        bearing = FaultClass.BEARING_DAMAGE
        model = fit_arrays([[-1.0], [1.0], [-1.0], [1.0]], [NORM, NORM, bearing, bearing], ["rms"], GAUSSIAN)

        result = diagnose(model, [0.0])

        assert result.posteriors == pytest.approx([0.5, 0.5])
        assert result.label == FaultClass.BEARING_DAMAGE
        assert result.confidence == pytest.approx(0.5)

    def test_random_inputs_normalized(self):
        rng = np.random.default_rng(1)
        labels = [c for c in CANONICAL_CLASSES for _ in range(5)]
        model = fit_arrays(rng.normal(size=(35, 3)), labels, ["rms", "kurtosis", "a1x"], GAUSSIAN)

        for query in rng.normal(scale=3.0, size=(50, 3)):
            posteriors, _ = posterior(model, query)
            assert posteriors.sum() == pytest.approx(1.0, abs=1e-9)
            assert np.all(posteriors >= 0)

    def test_non_finite_query(self):
        model = fit_arrays([[-1.0], [1.0], [9.0], [11.0]], [NORM, NORM, IMB, IMB], ["rms"], GAUSSIAN)

        with pytest.raises(InputValidationError):
            posterior(model, [np.nan])

    def test_wrong_length_query(self):
        model = fit_arrays([[-1.0], [1.0], [9.0], [11.0]], [NORM, NORM, IMB, IMB], ["rms"], GAUSSIAN)

        with pytest.raises(InputValidationError):
            posterior(model, [0.0, 1.0])

    def test_discrete_model_matches_exhaustive_tables(self):
        """Test diagnose against a direct evaluation of prior x smoothed table products."""
        rows = {
            FaultClass.CAVITATION: [(0, 0), (0, 1), (1, 0), (3, 3)],
            FaultClass.LOOSENESS: [(2, 2), (3, 2), (2, 3)],
            NORM: [(0, 3), (1, 1), (1, 2), (2, 0), (3, 1)],
        }
        classes = list(rows)

        model = _fit_rows(rows)

        for query in itertools.product(range(4), repeat=2):
            expected = _exhaustive_posteriors(rows, query)

            result = diagnose(model, [float(v) for v in query])

            assert result.posteriors == pytest.approx(expected.tolist(), abs=1e-12)
            top = np.sort(expected)[-2:]
            if top[1] - top[0] > 1e-9:
                assert result.label == classes[int(np.argmax(expected))]

    @pytest.mark.parametrize("seed", range(25))
    def test_random_tables_match_exhaustive(self, seed):
        """Test random three-class training sets against the direct evaluation."""
        rng = np.random.default_rng(seed)
        classes = [FaultClass.BEARING_DAMAGE, FaultClass.GEAR_FAULT, IMB]
        rows = {
            c: [(int(a), int(b)) for a, b in rng.integers(0, 4, size=(rng.integers(3, 9), 2))] for c in classes
        }
        # pin both features to the full 0..3 range so the bin edges fall between levels
        rows[classes[0]] += [(0, 0), (3, 3)]

        model = _fit_rows(rows)

        for query in itertools.product(range(4), repeat=2):
            result = diagnose(model, [float(v) for v in query])

            assert result.posteriors == pytest.approx(_exhaustive_posteriors(rows, query).tolist(), abs=1e-12)

    def test_smoothing_pulls_toward_prior(self):
        """Test that a larger alpha moves the posterior monotonically toward the class prior."""
        rows = {
            FaultClass.CAVITATION: [(0, 0), (0, 1), (1, 0), (3, 3)],
            FaultClass.LOOSENESS: [(2, 2), (3, 2), (2, 3)],
            NORM: [(0, 3), (1, 1), (1, 2), (2, 0), (3, 1)],
        }
        prior = np.array([4, 3, 5]) / 12

        distances = []
        for alpha in (0.0, 1.0, 100.0):
            posteriors = np.asarray(diagnose(_fit_rows(rows, alpha), [0.0, 0.0]).posteriors)
            assert posteriors == pytest.approx(_exhaustive_posteriors(rows, (0, 0), alpha).tolist(), abs=1e-12)
            distances.append(0.5 * np.abs(posteriors - prior).sum())

        assert distances[0] > distances[1] > distances[2]
        assert distances[0] == pytest.approx(0.5)
        assert distances[2] < 0.01

    def test_diagnose_many_preserves_order(self):
        model = fit_arrays([[-1.0], [1.0], [9.0], [11.0]], [NORM, NORM, IMB, IMB], ["rms"], GAUSSIAN)

        results = diagnose_many(model, [[0.0], [10.0], [0.5]])

        assert [r.label for r in results] == [NORM, IMB, NORM]


class TestModelPersistence:
    """Test model serialization."""

    def test_round_trip(self, tmp_path):
        settings = BayesSettings(discretize=["harmonic_count"])
        X = [[0.0, 1.0], [0.2, 2.0], [5.0, 7.0], [5.5, 9.0]]
        model = fit_arrays(X, [NORM, NORM, IMB, IMB], ["rms", "harmonic_count"], settings)

        loaded = load_model(save_model(model, tmp_path / "model.json"))

        assert loaded == model
        assert diagnose(loaded, [0.1, 1.0]) == diagnose(model, [0.1, 1.0])

    def test_missing_file(self, tmp_path):
        with pytest.raises(PersistenceError) as exc:
            load_model(tmp_path / "absent.json")

        assert exc.value.exit_code == 5

    def test_unsupported_version(self, tmp_path):
        model = fit_arrays([[-1.0], [1.0], [9.0], [11.0]], [NORM, NORM, IMB, IMB], ["rms"], GAUSSIAN)
        path = save_model(model, tmp_path / "model.json")
        payload = json.loads(path.read_text())
        payload["format_version"] = 99
        path.write_text(json.dumps(payload))

        with pytest.raises(PersistenceError) as exc:
            load_model(path)

        assert "format version 99" in exc.value.message

    def test_malformed_file(self, tmp_path):
        path = tmp_path / "model.json"
        path.write_text('{"classes": ["normal"], "priors": [0.4]}')

        with pytest.raises(PersistenceError):
            load_model(path)
