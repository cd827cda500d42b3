"""
Trustworthiness metrics.

Accuracy-style metrics, calibration error (equal-width and equal-mass ECE),
proper scoring rules (NLL, Brier) and selective-prediction risk over
confidence-ranked coverage. All functions are pure.
"""

import logging
from typing import NamedTuple, Optional, Sequence

import numpy as np
from scipy.integrate import trapezoid
from sklearn.metrics import precision_recall_fscore_support

from fault_arbiter.exceptions import InputValidationError, MetricError
from fault_arbiter.params import COVERAGE_THRESHOLDS, PROBABILITY_FLOOR
from fault_arbiter.schemas.enums import FaultClass
from fault_arbiter.schemas.report_schema import (
    ClassMetrics,
    CoverageRow,
    EvalReport,
    ReliabilityBin,
)


logger = logging.getLogger(__name__)


class RiskCoverage(NamedTuple):
    curve: list[tuple[float, float]]
    aurc: float
    auacc: float
    table: list[CoverageRow]


class SystemPrediction(NamedTuple):
    """
    One system output for one case.

    label and confidence are None when the system abstained. probabilities,
    when given, is the full class-probability vector in the order of the
    evaluated class list.
    """

    true_label: FaultClass
    label: Optional[FaultClass]
    confidence: Optional[float]
    probabilities: Optional[Sequence[float]] = None


# === Input Checks ===


def _binary_inputs(confidences, correct, metric: str) -> tuple[np.ndarray, np.ndarray]:
    conf = np.asarray(confidences, dtype=float).ravel()
    hits = np.asarray(correct, dtype=float).ravel()
    if conf.size == 0:
        raise MetricError(f"{metric} needs at least one sample", metric=metric)
    if conf.shape != hits.shape:
        raise InputValidationError(
            f"{metric}: {conf.size} confidences but {hits.size} correctness flags",
            field="correct",
        )
    if not np.all(np.isfinite(conf)) or conf.min() < 0.0 or conf.max() > 1.0:
        raise InputValidationError(f"{metric}: confidences must lie in [0, 1]", field="confidences")
    return conf, hits


def _probability_inputs(probabilities, labels, metric: str) -> tuple[np.ndarray, np.ndarray]:
    probs = np.atleast_2d(np.asarray(probabilities, dtype=float))
    targets = np.asarray(labels, dtype=int).ravel()
    if probs.shape[0] != targets.size:
        raise InputValidationError(
            f"{metric}: {probs.shape[0]} probability vectors but {targets.size} labels",
            field="labels",
        )
    if targets.size == 0:
        raise MetricError(f"{metric} needs at least one sample", metric=metric)
    if targets.min() < 0 or targets.max() >= probs.shape[1]:
        raise InputValidationError(f"{metric}: label index out of range", field="labels")
    if not np.allclose(probs.sum(axis=1), 1.0, rtol=0.0, atol=1e-6):
        raise InputValidationError(f"{metric}: probability vectors must sum to 1", field="probabilities")
    return probs, targets


# === Calibration Error ===


def reliability_bins(confidences, correct, n_bins: int = 15) -> list[ReliabilityBin]:
    """
    Equal-width, right-closed bins over (0, 1]; confidence 0 lands in the first bin.
    """
    if n_bins < 1:
        raise InputValidationError("n_bins must be at least 1", field="n_bins")
    conf, hits = _binary_inputs(confidences, correct, "reliability")
    edges = np.linspace(0.0, 1.0, n_bins + 1)
    index = np.searchsorted(edges[1:-1], conf, side="left")

    bins = []
    for k in range(n_bins):
        members = index == k
        count = int(members.sum())
        bins.append(
            ReliabilityBin(
                lower=float(edges[k]),
                upper=float(edges[k + 1]),
                count=count,
                mean_confidence=float(conf[members].mean()) if count else 0.0,
                accuracy=float(hits[members].mean()) if count else 0.0,
            )
        )
    return bins


def ece(confidences, correct, n_bins: int = 15) -> float:
    """Expected calibration error over equal-width bins."""
    bins = reliability_bins(confidences, correct, n_bins)
    total = sum(b.count for b in bins)
    return float(sum(b.count / total * b.gap for b in bins if b.count))


def adaptive_ece(confidences, correct, n_bins: int = 15) -> float:
    """
    Calibration error over equal-mass bins.

    Samples are ranked by confidence with a stable sort and split into
    n_bins groups whose sizes differ by at most one.
    """
    if n_bins < 1:
        raise InputValidationError("n_bins must be at least 1", field="n_bins")
    conf, hits = _binary_inputs(confidences, correct, "adaptive_ece")
    order = np.argsort(conf, kind="stable")
    total = 0.0
    for group in np.array_split(order, n_bins):
        if group.size:
            total += group.size / conf.size * abs(hits[group].mean() - conf[group].mean())
    return float(total)


# === Scoring Rules ===


def nll(probabilities, labels) -> float:
    """Mean negative log-probability of the true class, floored before the log."""
    probs, targets = _probability_inputs(probabilities, labels, "nll")
    picked = probs[np.arange(targets.size), targets]
    return float(-np.mean(np.log(np.maximum(picked, PROBABILITY_FLOOR))))


def brier(probabilities, labels) -> float:
    """Mean squared distance between the probability vector and the one-hot label."""
    probs, targets = _probability_inputs(probabilities, labels, "brier")
    onehot = np.zeros_like(probs)
    onehot[np.arange(targets.size), targets] = 1.0
    return float(np.mean(np.sum((probs - onehot) ** 2, axis=1)))


# === Selective Prediction ===


def risk_coverage(
    confidences, correct, thresholds: Sequence[float] = COVERAGE_THRESHOLDS
) -> RiskCoverage:
    """
    Risk-coverage curve, its areas and the threshold table.

    Samples are ranked by descending confidence (stable on ties). The curve
    holds (n/N, errors/n) for every prefix; both areas are trapezoids over
    that grid with the coverage-0 point taking the first prefix's risk.
    """
    conf, hits = _binary_inputs(confidences, correct, "risk_coverage")
    order = np.argsort(-conf, kind="stable")
    answered = np.arange(1, conf.size + 1)
    risk = np.cumsum(1.0 - hits[order]) / answered
    coverage = answered / conf.size

    grid = np.concatenate(([0.0], coverage))
    risk_on_grid = np.concatenate(([risk[0]], risk))
    aurc = float(trapezoid(risk_on_grid, grid))
    auacc = float(trapezoid(1.0 - risk_on_grid, grid))

    table = []
    for threshold in thresholds:
        kept = conf >= threshold
        count = int(kept.sum())
        table.append(
            CoverageRow(
                threshold=float(threshold),
                coverage=count / conf.size,
                risk=float(1.0 - hits[kept].mean()) if count else 0.0,
                count=count,
            )
        )

    curve = [(float(c), float(r)) for c, r in zip(coverage, risk)]
    return RiskCoverage(curve=curve, aurc=aurc, auacc=auacc, table=table)


# === System Evaluation ===


def spread_probabilities(label_index: int, confidence: float, n_classes: int) -> np.ndarray:
    """Vector with the confidence on one class and the remainder spread evenly."""
    vector = np.full(n_classes, (1.0 - confidence) / (n_classes - 1))
    vector[label_index] = confidence
    return vector


def per_class_metrics(
    y_true: Sequence[FaultClass], y_pred: Sequence[FaultClass], classes: Sequence[FaultClass]
) -> list[ClassMetrics]:
    labels = [c.value for c in classes]
    precision, recall, f1, support = precision_recall_fscore_support(
        [c.value for c in y_true],
        [c.value for c in y_pred],
        labels=labels,
        zero_division=0,
    )
    return [
        ClassMetrics(
            label=cls,
            precision=float(p),
            recall=float(r),
            f1=float(f),
            support=int(s),
        )
        for cls, p, r, f, s in zip(classes, precision, recall, f1, support)
    ]


def evaluate_system(
    name: str,
    predictions: Sequence[SystemPrediction],
    classes: Sequence[FaultClass],
    n_bins: int = 15,
    thresholds: Sequence[float] = COVERAGE_THRESHOLDS,
) -> EvalReport:
    """
    Full metric suite for one system.

    Accuracy, per-class metrics, ECE, NLL, Brier and the risk-coverage areas
    are computed over answered cases; coverage, abstention rate and
    full accuracy (abstentions counted as misses) cover every case.

    Raises:
        MetricError: If there are no predictions or every case abstained
    """
    if not predictions:
        raise MetricError(f"No predictions to evaluate for '{name}'", metric="evaluate")
    answered = [p for p in predictions if p.label is not None]
    if not answered:
        raise MetricError(f"System '{name}' abstained on every case", metric="evaluate")

    classes = list(classes)
    position = {cls: i for i, cls in enumerate(classes)}
    conf = np.array([p.confidence for p in answered], dtype=float)
    hits = np.array([p.label == p.true_label for p in answered], dtype=float)
    targets = np.array([position[p.true_label] for p in answered])
    probs = np.vstack(
        [
            np.asarray(p.probabilities, dtype=float)
            if p.probabilities is not None
            else spread_probabilities(position[p.label], p.confidence, len(classes))
            for p in answered
        ]
    )
    selective = risk_coverage(conf, hits, thresholds)

    report = EvalReport(
        system=name,
        n_samples=len(predictions),
        n_answered=len(answered),
        coverage=len(answered) / len(predictions),
        abstention_rate=1.0 - len(answered) / len(predictions),
        accuracy=float(hits.mean()),
        full_accuracy=float(hits.sum() / len(predictions)),
        ece=ece(conf, hits, n_bins),
        adaptive_ece=adaptive_ece(conf, hits, n_bins),
        nll=nll(probs, targets),
        brier=brier(probs, targets),
        aurc=selective.aurc,
        auacc=selective.auacc,
        per_class=per_class_metrics(
            [p.true_label for p in answered], [p.label for p in answered], classes
        ),
        reliability=reliability_bins(conf, hits, n_bins),
        risk_coverage=selective.curve,
        coverage_table=selective.table,
    )
    logger.info(
        f"{name}: accuracy {report.accuracy:.3f}, ECE {report.ece:.3f}, "
        f"AURC {report.aurc:.3f}, coverage {report.coverage:.3f}",
        extra={"system": name, "n_samples": report.n_samples},
    )
    return report
