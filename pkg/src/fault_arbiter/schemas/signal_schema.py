from pathlib import Path
from typing import Any, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from fault_arbiter.exceptions import InputValidationError, MetadataError, SignalLengthError
from fault_arbiter.schemas.enums import FaultClass, Split


MIN_SIGNAL_LENGTH = 4096


class SynthConfig(BaseModel):
    """
    Per-recording synthesis settings.

    Range invariants are checked by signal_synth.check_synth_config so that
    violations surface as ConfigurationError at synthesis time.
    """

    model_config = ConfigDict(frozen=True)

    sample_rate: float = 10000.0
    duration: float = 2.0
    shaft_freq: float = 60.0
    severity: float = 1.0
    noise_std: float = 0.1
    base_amplitude: float = 1.0
    rng_seed: int = 0


class Signal(BaseModel):
    """A sampled vibration waveform x(t) with its acquisition metadata."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    samples: np.ndarray
    sample_rate: float
    shaft_freq: float
    id: str = "signal"
    label: Optional[FaultClass] = None
    severity: Optional[float] = None

    @field_validator("samples", mode="before")
    @classmethod
    def to_readonly_array(cls, v: Any) -> np.ndarray:
        arr = np.array(v, dtype=np.float64)
        arr.setflags(write=False)
        return arr

    @model_validator(mode="after")
    def validate_signal(self) -> "Signal":
        if self.samples.ndim != 1:
            raise InputValidationError("Signal samples must be 1-D", field="samples")
        if self.samples.size < MIN_SIGNAL_LENGTH:
            raise SignalLengthError(self.samples.size, MIN_SIGNAL_LENGTH, self.id)
        if not np.all(np.isfinite(self.samples)):
            raise InputValidationError(
                f"Signal '{self.id}' contains non-finite samples", field="samples"
            )
        if not self.sample_rate > 0:
            raise MetadataError("sample_rate must be positive", "sample_rate", self.sample_rate)
        if not self.shaft_freq > 0:
            raise MetadataError("shaft_freq must be positive", "shaft_freq", self.shaft_freq)
        return self

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate


class DatasetSpec(BaseModel):
    """Shape of a synthetic dataset."""

    model_config = ConfigDict(frozen=True)

    per_class_counts: int | dict[FaultClass, int] = 300
    severity_grid: list[float] = Field(default_factory=lambda: [0.3, 0.5, 0.7, 0.9, 1.0])
    seed: int = 0
    split_ratio: tuple[int, int, int] = (7, 2, 1)
    shaft_freq_range: tuple[float, float] = (45.0, 75.0)
    sample_rate: float = 10000.0
    duration: float = 2.0
    noise_std: float = 0.1
    base_amplitude: float = 1.0

    def count_for(self, fault_class: FaultClass) -> int:
        if isinstance(self.per_class_counts, int):
            return self.per_class_counts
        return self.per_class_counts.get(fault_class, 0)


class DatasetEntry(BaseModel):
    """One recording and the split it belongs to."""

    model_config = ConfigDict(frozen=True)

    signal: Signal
    split: Split


class Dataset(BaseModel):
    """A labeled, split collection of recordings in class-major, index order."""

    entries: list[DatasetEntry]

    def __len__(self) -> int:
        return len(self.entries)

    def by_split(self, split: Split) -> list[DatasetEntry]:
        return [entry for entry in self.entries if entry.split == split]

    def split_sizes(self) -> dict[Split, int]:
        return {split: len(self.by_split(split)) for split in Split}


class ManifestRow(BaseModel):
    """One manifest line: where a recording lives and what it is."""

    sample_id: str
    fault_class: FaultClass
    severity: float
    split: Split
    signal_path: Path
    shaft_freq: float
    sample_rate: float
