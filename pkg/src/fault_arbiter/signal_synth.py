"""
Synthetic vibration signals for the seven machine states.

Each class has a canonical signature scaled by severity s in [0, 1]:

- normal:        A sin(w t)
- imbalance:     (1 + 2s) A sin(w t)
- misalignment:  1X plus a 2X component with A2/A1 = 1.3 + 1.2s
- looseness:     harmonics k = 1..10 with amplitudes A r^(k-1), r = 0.5 + 0.4s
- bearing_damage: 1X plus decaying impulses at 3.58 f_s ringing a 2.5 kHz resonance
- gear_fault:    1X plus a 23X mesh tone with +/- f_s sidebands of relative amplitude 0.3 + 0.5s
- cavitation:    weak 1X plus 1-4 kHz band-limited noise with power proportional to s

plus white Gaussian noise of noise_std. Component phases come from the
recording's seeded generator, so a (class, config) pair always yields the
same samples.
"""

import logging
from collections.abc import Callable
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from scipy import signal as sp_signal

from fault_arbiter.exceptions import ConfigurationError
from fault_arbiter.schemas.enums import CANONICAL_CLASSES, FaultClass, Split
from fault_arbiter.schemas.settings_schema import CAVITATION_BAND_HZ, GEAR_SIDEBAND_ORDER
from fault_arbiter.schemas.signal_schema import (
    Dataset,
    DatasetEntry,
    DatasetSpec,
    Signal,
    SynthConfig,
)


logger = logging.getLogger(__name__)


BEARING_DEFECT_ORDER = 3.58
BEARING_RESONANCE_HZ = 2500.0
BEARING_DECAY_S = 0.5e-3
BEARING_IMPULSE_GAIN = 6.0
GEAR_MESH_ORDER = 23
LOOSENESS_HARMONICS = 10
MIN_SAMPLES = 8192

Generator = Callable[[np.ndarray, SynthConfig, np.random.Generator], np.ndarray]


# === Validation ===


def check_synth_config(cfg: SynthConfig) -> None:
    """
    Check SynthConfig invariants.

    Raises:
        ConfigurationError: On any violated invariant
    """
    if not 0.0 <= cfg.severity <= 1.0:
        raise ConfigurationError(f"severity {cfg.severity} outside [0, 1]", config_key="severity")
    if cfg.shaft_freq <= 0:
        raise ConfigurationError("shaft_freq must be positive", config_key="shaft_freq")
    if cfg.noise_std < 0:
        raise ConfigurationError("noise_std must be >= 0", config_key="noise_std")
    if cfg.base_amplitude <= 0:
        raise ConfigurationError("base_amplitude must be positive", config_key="base_amplitude")
    highest = max(GEAR_SIDEBAND_ORDER * cfg.shaft_freq, CAVITATION_BAND_HZ[1])
    if cfg.sample_rate <= 2 * highest:
        raise ConfigurationError(
            f"sample_rate {cfg.sample_rate:g} Hz must exceed {2 * highest:g} Hz",
            config_key="sample_rate",
        )
    if cfg.duration * cfg.sample_rate < MIN_SAMPLES:
        raise ConfigurationError(
            f"duration x sample_rate must give at least {MIN_SAMPLES} samples",
            config_key="duration",
        )


# === Class Signatures ===


def _tone(t: np.ndarray, freq: float, amplitude: float, phase: float) -> np.ndarray:
    return amplitude * np.sin(2 * np.pi * freq * t + phase)


def _normal(t: np.ndarray, cfg: SynthConfig, rng: np.random.Generator) -> np.ndarray:
    return _tone(t, cfg.shaft_freq, cfg.base_amplitude, rng.uniform(0, 2 * np.pi))


def _imbalance(t: np.ndarray, cfg: SynthConfig, rng: np.random.Generator) -> np.ndarray:
    amplitude = (1.0 + 2.0 * cfg.severity) * cfg.base_amplitude
    return _tone(t, cfg.shaft_freq, amplitude, rng.uniform(0, 2 * np.pi))


def _misalignment(t: np.ndarray, cfg: SynthConfig, rng: np.random.Generator) -> np.ndarray:
    phases = rng.uniform(0, 2 * np.pi, size=2)
    ratio = 1.3 + 1.2 * cfg.severity
    return _tone(t, cfg.shaft_freq, cfg.base_amplitude, phases[0]) + _tone(
        t, 2 * cfg.shaft_freq, ratio * cfg.base_amplitude, phases[1]
    )


def _looseness(t: np.ndarray, cfg: SynthConfig, rng: np.random.Generator) -> np.ndarray:
    phases = rng.uniform(0, 2 * np.pi, size=LOOSENESS_HARMONICS)
    decay = 0.5 + 0.4 * cfg.severity
    out = np.zeros_like(t)
    for k in range(1, LOOSENESS_HARMONICS + 1):
        out += _tone(t, k * cfg.shaft_freq, cfg.base_amplitude * decay ** (k - 1), phases[k - 1])
    return out


def _bearing_damage(t: np.ndarray, cfg: SynthConfig, rng: np.random.Generator) -> np.ndarray:
    out = _tone(t, cfg.shaft_freq, cfg.base_amplitude, rng.uniform(0, 2 * np.pi))
    defect_freq = BEARING_DEFECT_ORDER * cfg.shaft_freq
    period = 1.0 / defect_freq
    gain = BEARING_IMPULSE_GAIN * cfg.severity * cfg.base_amplitude
    if gain == 0.0:
        return out

    # Impulse onsets at exact (fractional) times; each rings for ~10 decay constants
    onsets = rng.uniform(0, period) + np.arange(0.0, t[-1] + period, period)
    ring = int(np.ceil(10 * BEARING_DECAY_S * cfg.sample_rate)) + 1
    for onset in onsets:
        start = int(np.ceil(onset * cfg.sample_rate))
        if start >= t.size:
            break
        stop = min(start + ring, t.size)
        local = t[start:stop] - onset
        out[start:stop] += (
            gain
            * np.exp(-local / BEARING_DECAY_S)
            * np.sin(2 * np.pi * BEARING_RESONANCE_HZ * local)
        )
    return out


def _gear_fault(t: np.ndarray, cfg: SynthConfig, rng: np.random.Generator) -> np.ndarray:
    phases = rng.uniform(0, 2 * np.pi, size=4)
    mesh = (1.2 + cfg.severity) * cfg.base_amplitude
    sideband = (0.3 + 0.5 * cfg.severity) * mesh
    f_mesh = GEAR_MESH_ORDER * cfg.shaft_freq
    return (
        _tone(t, cfg.shaft_freq, cfg.base_amplitude, phases[0])
        + _tone(t, f_mesh, mesh, phases[1])
        + _tone(t, f_mesh - cfg.shaft_freq, sideband, phases[2])
        + _tone(t, f_mesh + cfg.shaft_freq, sideband, phases[3])
    )


def _cavitation(t: np.ndarray, cfg: SynthConfig, rng: np.random.Generator) -> np.ndarray:
    out = _tone(t, cfg.shaft_freq, 0.5 * cfg.base_amplitude, rng.uniform(0, 2 * np.pi))
    raw = rng.normal(0.0, 1.0, size=t.size)
    sos = sp_signal.butter(4, CAVITATION_BAND_HZ, btype="bandpass", output="sos", fs=cfg.sample_rate)
    band = sp_signal.sosfiltfilt(sos, raw)
    band /= np.sqrt(np.mean(band**2))
    return out + np.sqrt(cfg.severity) * cfg.base_amplitude * band


_SIGNATURES: dict[FaultClass, Generator] = {
    FaultClass.BEARING_DAMAGE: _bearing_damage,
    FaultClass.CAVITATION: _cavitation,
    FaultClass.GEAR_FAULT: _gear_fault,
    FaultClass.IMBALANCE: _imbalance,
    FaultClass.LOOSENESS: _looseness,
    FaultClass.MISALIGNMENT: _misalignment,
    FaultClass.NORMAL: _normal,
}


# === Public API ===


def synthesize(fault_class: FaultClass, cfg: SynthConfig, sample_id: str | None = None) -> Signal:
    """
    Generate one recording of a machine state.

    Args:
        fault_class: Machine state to simulate
        cfg: Synthesis settings (severity scales the fault signature)
        sample_id: Identifier stored on the Signal (defaults to "<class>_<seed>")

    Returns:
        Signal labeled with fault_class and the severity used

    Raises:
        ConfigurationError: If cfg violates its invariants
    """
    check_synth_config(cfg)

    rng = np.random.default_rng(cfg.rng_seed)
    n = int(round(cfg.duration * cfg.sample_rate))
    t = np.arange(n) / cfg.sample_rate

    clean = _SIGNATURES[fault_class](t, cfg, rng)
    if cfg.noise_std > 0:
        clean = clean + rng.normal(0.0, cfg.noise_std, size=n)

    severity = 0.0 if fault_class == FaultClass.NORMAL else cfg.severity
    return Signal(
        samples=clean,
        sample_rate=cfg.sample_rate,
        shaft_freq=cfg.shaft_freq,
        id=sample_id or f"{fault_class.value}_{cfg.rng_seed}",
        label=fault_class,
        severity=severity,
    )


def split_counts(n: int, ratio: tuple[int, int, int]) -> tuple[int, int, int]:
    """Per-class train/val/test sizes: rounded train and val shares, the rest to test."""
    total = sum(ratio)
    n_train = int(round(n * ratio[0] / total))
    n_val = min(int(round(n * ratio[1] / total)), n - n_train)
    return n_train, n_val, n - n_train - n_val


def synthesize_dataset(spec: DatasetSpec, workers: int = 1) -> Dataset:
    """
    Generate a stratified, split dataset.

    Recording seeds are spawned from spec.seed in class-major order, so the
    result does not depend on the number of workers. Severities cycle
    through the grid within each class; split membership is a seeded
    permutation per class.

    Args:
        spec: Dataset shape
        workers: Parallel generation threads

    Returns:
        Dataset with entries ordered by class then index
    """
    root = np.random.SeedSequence(spec.seed)
    layout_seq, signal_seq = root.spawn(2)
    layout_rng = np.random.default_rng(layout_seq)

    jobs: list[tuple[FaultClass, SynthConfig, str, Split]] = []
    for fault_class in CANONICAL_CLASSES:
        n = spec.count_for(fault_class)
        if n < 1:
            raise ConfigurationError(
                f"per_class_counts for {fault_class.value} must be >= 1",
                config_key="per_class_counts",
            )
        n_train, n_val, _ = split_counts(n, spec.split_ratio)
        order = layout_rng.permutation(n)
        splits = np.empty(n, dtype=object)
        splits[order[:n_train]] = Split.TRAIN
        splits[order[n_train : n_train + n_val]] = Split.VAL
        splits[order[n_train + n_val :]] = Split.TEST
        shaft_freqs = layout_rng.uniform(*spec.shaft_freq_range, size=n)

        for i, child in enumerate(signal_seq.spawn(n)):
            cfg = SynthConfig(
                sample_rate=spec.sample_rate,
                duration=spec.duration,
                shaft_freq=float(shaft_freqs[i]),
                severity=spec.severity_grid[i % len(spec.severity_grid)],
                noise_std=spec.noise_std,
                base_amplitude=spec.base_amplitude,
                rng_seed=int(child.generate_state(1, dtype=np.uint64)[0]),
            )
            jobs.append((fault_class, cfg, f"{fault_class.value}_{i:04d}", splits[i]))

    logger.info(
        f"Synthesizing {len(jobs)} recordings (seed={spec.seed}, workers={workers})",
        extra={"seed": spec.seed, "n_samples": len(jobs)},
    )

    def _make(job: tuple[FaultClass, SynthConfig, str, Split]) -> DatasetEntry:
        fault_class, cfg, sample_id, split = job
        return DatasetEntry(signal=synthesize(fault_class, cfg, sample_id), split=split)

    with ThreadPoolExecutor(max_workers=workers) as executor:
        entries = list(executor.map(_make, jobs))

    return Dataset(entries=entries)
