"""
On-disk formats for pipeline artifacts.

Signals are a one-line text header followed by little-endian float32
samples:

    FASIG 1 <sample_rate> <shaft_freq> <n_samples>\\n<n_samples * 4 bytes>

Tables (manifest, features, diagnoses) are CSV; models, bundles and
evaluations are JSON; case records are JSON lines. Every OSError is
reported as PersistenceError with the offending path.
"""

import logging
from pathlib import Path
from typing import NamedTuple, Optional, Sequence, TypeVar

import numpy as np
import pandas as pd
from pydantic import BaseModel, ValidationError

from fault_arbiter.exceptions import PersistenceError
from fault_arbiter.params import SIGNAL_FILE_MAGIC, SIGNAL_FILE_SUFFIX, SIGNAL_FILE_VERSION
from fault_arbiter.schemas.diagnosis_schema import CaseRecord, Diagnosis
from fault_arbiter.schemas.enums import CANONICAL_CLASSES, FaultClass, Split
from fault_arbiter.schemas.feature_schema import FEATURE_NAMES, FeatureVector
from fault_arbiter.schemas.signal_schema import Dataset, DatasetEntry, ManifestRow, Signal


logger = logging.getLogger(__name__)

ModelT = TypeVar("ModelT", bound=BaseModel)

SIGNAL_DTYPE = np.dtype("<f4")
MANIFEST_FILE = "manifest.csv"
SIGNALS_DIR = "signals"


class FeatureRow(NamedTuple):
    sample_id: str
    split: Split
    true_label: FaultClass
    features: FeatureVector


class DiagnosisRow(NamedTuple):
    sample_id: str
    split: Split
    true_label: FaultClass
    diagnosis: Diagnosis


def _read_csv(path: Path) -> pd.DataFrame:
    try:
        return pd.read_csv(path, float_precision="round_trip", keep_default_na=False)
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as exc:
        raise PersistenceError(f"Could not read table: {exc}", str(path), exc) from exc


def _write_csv(frame: pd.DataFrame, path: Path) -> Path:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        frame.to_csv(path, index=False)
    except OSError as exc:
        raise PersistenceError(f"Could not write table: {exc}", str(path), exc) from exc
    return path


def _missing_columns(frame: pd.DataFrame, required: Sequence[str], path: Path) -> None:
    missing = [column for column in required if column not in frame.columns]
    if missing:
        raise PersistenceError(f"Table is missing columns: {', '.join(missing)}", str(path))


# === Signals ===


def quantize(signal: Signal) -> Signal:
    """The signal as it reads back from disk (float32 samples)."""
    return Signal(
        samples=signal.samples.astype(SIGNAL_DTYPE),
        sample_rate=signal.sample_rate,
        shaft_freq=signal.shaft_freq,
        id=signal.id,
        label=signal.label,
        severity=signal.severity,
    )


def write_signal(signal: Signal, path: Path) -> Path:
    header = (
        f"{SIGNAL_FILE_MAGIC} {SIGNAL_FILE_VERSION} "
        f"{signal.sample_rate!r} {signal.shaft_freq!r} {signal.samples.size}\n"
    )
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(header.encode("ascii") + signal.samples.astype(SIGNAL_DTYPE).tobytes())
    except OSError as exc:
        raise PersistenceError(f"Could not write signal: {exc}", str(path), exc) from exc
    return path


def read_signal(
    path: Path,
    sample_id: Optional[str] = None,
    label: Optional[FaultClass] = None,
    severity: Optional[float] = None,
) -> Signal:
    """
    Read a signal file.

    Raises:
        PersistenceError: On a missing file, a foreign header or a truncated body
        InputValidationError: If the stored samples do not form a valid signal
    """
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise PersistenceError(f"Could not read signal: {exc}", str(path), exc) from exc

    header, sep, body = raw.partition(b"\n")
    fields = header.decode("ascii", errors="replace").split()
    if not sep or len(fields) != 5 or fields[0] != SIGNAL_FILE_MAGIC:
        raise PersistenceError("Not a signal file", str(path))
    if fields[1] != str(SIGNAL_FILE_VERSION):
        raise PersistenceError(f"Signal file version {fields[1]} is not supported", str(path))
    try:
        sample_rate, shaft_freq, n_samples = float(fields[2]), float(fields[3]), int(fields[4])
    except ValueError as exc:
        raise PersistenceError(f"Malformed signal header: {exc}", str(path), exc) from exc
    if len(body) != n_samples * SIGNAL_DTYPE.itemsize:
        raise PersistenceError(
            f"Signal body holds {len(body)} bytes, header promises {n_samples} samples", str(path)
        )

    return Signal(
        samples=np.frombuffer(body, dtype=SIGNAL_DTYPE),
        sample_rate=sample_rate,
        shaft_freq=shaft_freq,
        id=sample_id or path.stem,
        label=label,
        severity=severity,
    )


# === Dataset ===


def write_dataset(dataset: Dataset, root: Path) -> list[ManifestRow]:
    """Write every signal under root/signals and the manifest under root."""
    rows = []
    for entry in dataset.entries:
        signal = entry.signal
        relative = Path(SIGNALS_DIR) / f"{signal.id}{SIGNAL_FILE_SUFFIX}"
        write_signal(signal, root / relative)
        rows.append(
            ManifestRow(
                sample_id=signal.id,
                fault_class=signal.label,
                severity=signal.severity if signal.severity is not None else 0.0,
                split=entry.split,
                signal_path=relative,
                shaft_freq=signal.shaft_freq,
                sample_rate=signal.sample_rate,
            )
        )
    write_manifest(rows, root / MANIFEST_FILE)
    logger.info(f"Wrote {len(rows)} signals to {root}", extra={"n_signals": len(rows)})
    return rows


def write_manifest(rows: Sequence[ManifestRow], path: Path) -> Path:
    frame = pd.DataFrame([row.model_dump(mode="json") for row in rows], columns=list(ManifestRow.model_fields))
    return _write_csv(frame, path)


def read_manifest(path: Path) -> list[ManifestRow]:
    frame = _read_csv(path)
    _missing_columns(frame, list(ManifestRow.model_fields), path)
    try:
        return [ManifestRow.model_validate(record) for record in frame.to_dict(orient="records")]
    except ValidationError as exc:
        raise PersistenceError(f"Malformed manifest: {exc.errors()[0]['msg']}", str(path), exc) from exc


def load_dataset(root: Path) -> Dataset:
    """Read the manifest under root and every signal it lists, in manifest order."""
    entries = []
    for row in read_manifest(root / MANIFEST_FILE):
        signal = read_signal(root / row.signal_path, row.sample_id, row.fault_class, row.severity)
        entries.append(DatasetEntry(signal=signal, split=row.split))
    logger.info(f"Loaded {len(entries)} signals from {root}", extra={"n_signals": len(entries)})
    return Dataset(entries=entries)


# === Feature and Diagnosis Tables ===


def write_features(rows: Sequence[FeatureRow], path: Path) -> Path:
    frame = pd.DataFrame(
        [
            {
                "sample_id": row.sample_id,
                "split": row.split.value,
                "true_label": row.true_label.value,
                **{name: getattr(row.features, name) for name in FEATURE_NAMES},
                "shaft_freq": row.features.shaft_freq,
            }
            for row in rows
        ],
        columns=["sample_id", "split", "true_label", *FEATURE_NAMES, "shaft_freq"],
    )
    return _write_csv(frame, path)


def read_features(path: Path) -> list[FeatureRow]:
    frame = _read_csv(path)
    _missing_columns(frame, ["sample_id", "split", "true_label", *FEATURE_NAMES, "shaft_freq"], path)
    try:
        return [
            FeatureRow(
                sample_id=str(record["sample_id"]),
                split=Split(record["split"]),
                true_label=FaultClass(record["true_label"]),
                features=FeatureVector.from_mapping(record, float(record["shaft_freq"])),
            )
            for record in frame.to_dict(orient="records")
        ]
    except (ValueError, ValidationError) as exc:
        raise PersistenceError(f"Malformed feature table: {exc}", str(path), exc) from exc


def write_diagnoses(rows: Sequence[DiagnosisRow], path: Path) -> Path:
    """One row per sample: label, confidence, then posteriors and log scores in canonical order."""
    records = []
    for row in rows:
        diagnosis = row.diagnosis
        record = {
            "sample_id": row.sample_id,
            "split": row.split.value,
            "true_label": row.true_label.value,
            "label": diagnosis.label.value,
            "confidence": diagnosis.confidence,
        }
        record.update({f"posterior_{c.value}": p for c, p in zip(diagnosis.classes, diagnosis.posteriors)})
        record.update({f"log_score_{c.value}": s for c, s in zip(diagnosis.classes, diagnosis.log_scores)})
        records.append(record)
    columns = [
        "sample_id",
        "split",
        "true_label",
        "label",
        "confidence",
        *(f"posterior_{c.value}" for c in CANONICAL_CLASSES),
        *(f"log_score_{c.value}" for c in CANONICAL_CLASSES),
    ]
    return _write_csv(pd.DataFrame(records, columns=columns), path)


def read_diagnoses(path: Path) -> list[DiagnosisRow]:
    frame = _read_csv(path)
    _missing_columns(frame, ["sample_id", "split", "true_label", "label", "confidence"], path)
    classes = [c for c in CANONICAL_CLASSES if f"posterior_{c.value}" in frame.columns]
    try:
        return [
            DiagnosisRow(
                sample_id=str(record["sample_id"]),
                split=Split(record["split"]),
                true_label=FaultClass(record["true_label"]),
                diagnosis=Diagnosis(
                    label=FaultClass(record["label"]),
                    confidence=float(record["confidence"]),
                    classes=classes,
                    posteriors=[float(record[f"posterior_{c.value}"]) for c in classes],
                    log_scores=[float(record[f"log_score_{c.value}"]) for c in classes],
                ),
            )
            for record in frame.to_dict(orient="records")
        ]
    except (ValueError, KeyError, ValidationError) as exc:
        raise PersistenceError(f"Malformed diagnosis table: {exc}", str(path), exc) from exc


def write_table(frame: pd.DataFrame, path: Path) -> Path:
    return _write_csv(frame, path)


# === JSON Artifacts ===


def save_json(model: BaseModel, path: Path) -> Path:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(model.model_dump_json(indent=2), encoding="utf-8")
    except OSError as exc:
        raise PersistenceError(f"Could not write {path.name}: {exc}", str(path), exc) from exc
    return path


def load_json(model_type: type[ModelT], path: Path) -> ModelT:
    try:
        return model_type.model_validate_json(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise PersistenceError(f"Could not read {path.name}: {exc}", str(path), exc) from exc
    except ValidationError as exc:
        raise PersistenceError(f"Malformed {path.name}: {exc.errors()[0]['msg']}", str(path), exc) from exc


def write_cases(records: Sequence[CaseRecord], path: Path) -> Path:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", encoding="utf-8") as handle:
            for record in records:
                handle.write(record.model_dump_json() + "\n")
    except OSError as exc:
        raise PersistenceError(f"Could not write case records: {exc}", str(path), exc) from exc
    return path


def read_cases(path: Path) -> list[CaseRecord]:
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise PersistenceError(f"Could not read case records: {exc}", str(path), exc) from exc
    try:
        return [CaseRecord.model_validate_json(line) for line in lines if line.strip()]
    except ValidationError as exc:
        raise PersistenceError(f"Malformed case record: {exc.errors()[0]['msg']}", str(path), exc) from exc


def write_text(text: str, path: Path) -> Path:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise PersistenceError(f"Could not write {path.name}: {exc}", str(path), exc) from exc
    return path


def write_bytes(data: bytes, path: Path) -> Path:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(data)
    except OSError as exc:
        raise PersistenceError(f"Could not write {path.name}: {exc}", str(path), exc) from exc
    return path
