"""
Multi-domain feature extraction.

Builds the combined feature vector f = [f_time, f_freq, f_order, f_env]
from one vibration signal and keeps the intermediate spectra for the
diagnostic charts:

- time:     rms, crest factor, kurtosis, impulse factor, clearance factor
- freq:     dominant frequency and spectral centroid of the Hann-framed FFT
- order:    1X/2X amplitudes, their ratio and the harmonic count, read from
            an order spectrum after speed-tracked angular resampling
- envelope: kurtosis and peak frequency of the Hilbert envelope of the
            band-passed signal
"""

import logging
from typing import NamedTuple

import numpy as np
from scipy import fft as sp_fft
from scipy import ndimage
from scipy import signal as sp_signal
from scipy import stats
from scipy.integrate import cumulative_trapezoid
from scipy.interpolate import CubicSpline

from fault_arbiter.exceptions import (
    ConfigurationError,
    DegenerateSignalError,
    DegenerateSpectrumError,
    InputValidationError,
    MetadataError,
    SignalLengthError,
)
from fault_arbiter.params import ENVELOPE_EDGE_GUARD
from fault_arbiter.schemas.enums import SpectrumKind
from fault_arbiter.schemas.feature_schema import FeatureVector, Spectrum
from fault_arbiter.schemas.settings_schema import FeatureConfig
from fault_arbiter.schemas.signal_schema import Signal


logger = logging.getLogger(__name__)


# Envelope std below this fraction of its mean is treated as flat
FLAT_ENVELOPE_RATIO = 1e-3
ORDER_READ_WIDTH = 0.1
SPEED_ZERO_PAD = 8


class TimeFeatures(NamedTuple):
    rms: float
    crest_factor: float
    kurtosis: float
    impulse_factor: float
    clearance_factor: float


class OrderAnalysis(NamedTuple):
    """Order-domain readings; amplitudes are indexed by order 1..max_harmonics."""

    a1x: float
    a2x: float
    ratio_2x_1x: float
    harmonic_count: int
    harmonic_amplitudes: np.ndarray
    normalized_1x: np.ndarray
    normalized_max: np.ndarray
    spectrum: Spectrum
    speed_track: np.ndarray


class EnvelopeAnalysis(NamedTuple):
    env_kurtosis: float
    env_peak_freq: float
    spectrum: Spectrum


class ExtractionResult(NamedTuple):
    features: FeatureVector
    spectra: dict[SpectrumKind, Spectrum]


# === Time Domain ===


def time_features(sig: Signal) -> TimeFeatures:
    """
    Statistical time-domain features.

    Raises:
        DegenerateSignalError: If the signal is constant
    """
    x = sig.samples
    if np.ptp(x) == 0:
        raise DegenerateSignalError(f"Signal '{sig.id}' is constant", signal_id=sig.id)

    abs_x = np.abs(x)
    peak = float(abs_x.max())
    rms = float(np.sqrt(np.mean(x**2)))
    return TimeFeatures(
        rms=rms,
        crest_factor=max(peak / rms, 1.0),
        kurtosis=float(stats.kurtosis(x, fisher=False, bias=True)),
        impulse_factor=peak / float(abs_x.mean()),
        clearance_factor=peak / float(np.mean(np.sqrt(abs_x))) ** 2,
    )


# === Frequency Domain ===


def _framed_spectrum(
    x: np.ndarray, sample_rate: float, fft_size: int, kind: SpectrumKind, signal_id: str
) -> Spectrum:
    """Average amplitude spectrum over non-overlapping Hann frames."""
    n_frames = x.size // fft_size
    if n_frames < 1:
        raise SignalLengthError(x.size, fft_size, signal_id)

    window = sp_signal.get_window("hann", fft_size)
    frames = x[: n_frames * fft_size].reshape(n_frames, fft_size)
    magnitudes = np.abs(sp_fft.rfft(frames * window, axis=1)).mean(axis=0)

    # Single-sided amplitude; DC and Nyquist appear once in the full spectrum
    magnitudes *= 2.0 / window.sum()
    magnitudes[0] /= 2.0
    if fft_size % 2 == 0:
        magnitudes[-1] /= 2.0

    return Spectrum(
        freqs=sp_fft.rfftfreq(fft_size, d=1.0 / sample_rate),
        magnitudes=magnitudes,
        kind=kind,
        resolution=sample_rate / fft_size,
    )


def fft_spectrum(sig: Signal, fft_size: int = 4096) -> Spectrum:
    """
    Hann-windowed amplitude spectrum averaged over non-overlapping frames.

    Args:
        sig: Input signal
        fft_size: Frame length; resolution is sample_rate / fft_size

    Raises:
        SignalLengthError: If the signal is shorter than one frame
    """
    return _framed_spectrum(sig.samples, sig.sample_rate, fft_size, SpectrumKind.FFT, sig.id)


def freq_features(spec: Spectrum) -> tuple[float, float]:
    """
    Dominant frequency and spectral centroid, DC bin excluded.

    Returns:
        (f_dom, f_c)

    Raises:
        DegenerateSpectrumError: If the spectrum has no energy outside DC
    """
    freqs = spec.freqs[1:]
    mags = spec.magnitudes[1:]
    total = float(mags.sum())
    if total == 0.0:
        raise DegenerateSpectrumError(spec.kind.value)

    f_dom = float(freqs[np.argmax(mags)])
    f_c = float(np.dot(freqs, mags) / total)
    return f_dom, f_c


# === Order Domain ===


def _segment_peak(segment: np.ndarray, sample_rate: float, nominal: float, cfg: FeatureConfig) -> float:
    n_fft = sp_fft.next_fast_len(SPEED_ZERO_PAD * segment.size)
    window = sp_signal.get_window("hann", segment.size)
    mags = np.abs(sp_fft.rfft((segment - segment.mean()) * window, n=n_fft))
    freqs = sp_fft.rfftfreq(n_fft, d=1.0 / sample_rate)

    in_band = np.flatnonzero(np.abs(freqs - nominal) <= cfg.speed_search_width * nominal)
    if in_band.size < 3 or not np.any(mags[in_band] > 0):
        return nominal
    idx = int(in_band[np.argmax(mags[in_band])])
    if idx in (in_band[0], in_band[-1]):
        return nominal

    # Parabolic interpolation on log magnitude
    alpha, beta, gamma = np.log(np.maximum(mags[idx - 1 : idx + 2], np.finfo(float).tiny))
    denom = alpha - 2 * beta + gamma
    offset = 0.5 * (alpha - gamma) / denom if denom != 0 else 0.0
    estimate = freqs[idx] + offset * (freqs[1] - freqs[0])

    if abs(estimate - nominal) > cfg.speed_fallback_tolerance * nominal:
        return nominal
    return float(estimate)


def shaft_speed_track(sig: Signal, cfg: FeatureConfig) -> tuple[np.ndarray, np.ndarray]:
    """
    Median-smoothed per-segment 1X frequency estimates.

    Returns:
        (segment center times in s, smoothed shaft frequency in Hz)
    """
    seg_len = sig.samples.size // cfg.speed_segments
    estimates = np.array(
        [
            _segment_peak(
                sig.samples[i * seg_len : (i + 1) * seg_len], sig.sample_rate, sig.shaft_freq, cfg
            )
            for i in range(cfg.speed_segments)
        ]
    )
    smoothed = ndimage.median_filter(estimates, size=cfg.median_kernel, mode="nearest")
    centers = (np.arange(cfg.speed_segments) + 0.5) * seg_len / sig.sample_rate
    return centers, smoothed


def order_features(
    sig: Signal,
    tau: float = 0.1,
    max_harmonics: int = 10,
    cfg: FeatureConfig | None = None,
) -> OrderAnalysis:
    """
    Order analysis after speed-tracked angular resampling.

    The shaft-speed track is integrated to revolutions and the signal is
    resampled (cubic spline) to cfg.samples_per_rev samples per revolution
    over a whole number of revolutions. A flat-top window keeps harmonic
    amplitudes accurate; A_kX is the largest bin within 0.1 order of k.

    Args:
        sig: Input signal (shaft_freq is the nominal 1X)
        tau: Harmonic threshold as a fraction of A_1X
        max_harmonics: Highest order counted in N_h
        cfg: Resampling and speed-tracking settings

    Raises:
        MetadataError: If shaft_freq is not positive or the sample rate cannot
            resolve max_harmonics orders
    """
    cfg = cfg or FeatureConfig()
    if not sig.shaft_freq > 0:
        raise MetadataError("shaft_freq must be positive", "shaft_freq", sig.shaft_freq)
    if sig.sample_rate <= 2 * max_harmonics * sig.shaft_freq:
        raise MetadataError(
            f"sample_rate {sig.sample_rate:g} Hz cannot resolve order {max_harmonics} "
            f"at f_s = {sig.shaft_freq:g} Hz",
            "sample_rate",
            sig.sample_rate,
        )

    x = sig.samples
    t = np.arange(x.size) / sig.sample_rate
    centers, track = shaft_speed_track(sig, cfg)
    inst_freq = np.interp(t, centers, track)
    revolutions = cumulative_trapezoid(inst_freq, t, initial=0.0)

    n_revs = int(np.floor(revolutions[-1]))
    if n_revs < 1:
        raise InputValidationError(
            f"Signal '{sig.id}' covers less than one shaft revolution", field="samples"
        )
    spr = cfg.samples_per_rev
    rev_grid = np.arange(n_revs * spr) / spr
    t_grid = np.interp(rev_grid, revolutions, t)
    resampled = CubicSpline(t, x)(t_grid)

    window = sp_signal.get_window("flattop", resampled.size)
    magnitudes = np.abs(sp_fft.rfft(resampled * window)) * 2.0 / window.sum()
    magnitudes[0] /= 2.0
    orders = sp_fft.rfftfreq(resampled.size, d=1.0 / spr)
    spectrum = Spectrum(
        freqs=orders, magnitudes=magnitudes, kind=SpectrumKind.ORDER, resolution=1.0 / n_revs
    )

    def read_order(k: int) -> float:
        return float(magnitudes[np.abs(orders - k) <= ORDER_READ_WIDTH].max())

    amplitudes = np.array([read_order(k) for k in range(1, max_harmonics + 1)])
    a1x = float(amplitudes[0])
    a2x = read_order(2)
    ratio = a2x / a1x if a1x > 0 else 0.0
    harmonic_count = int(np.count_nonzero(amplitudes > tau * a1x))

    peak = amplitudes.max()
    return OrderAnalysis(
        a1x=a1x,
        a2x=a2x,
        ratio_2x_1x=ratio,
        harmonic_count=harmonic_count,
        harmonic_amplitudes=amplitudes,
        normalized_1x=amplitudes / a1x if a1x > 0 else np.zeros_like(amplitudes),
        normalized_max=amplitudes / peak if peak > 0 else np.zeros_like(amplitudes),
        spectrum=spectrum,
        speed_track=track,
    )


# === Envelope ===


def envelope_spectrum(
    sig: Signal, band: tuple[float, float] = (1500.0, 4000.0), fft_size: int = 4096
) -> EnvelopeAnalysis:
    """
    Envelope analysis: zero-phase 4th-order Butterworth band-pass, Hilbert
    magnitude, then the framed spectrum of the mean-removed envelope.

    Envelope kurtosis is measured away from the filter and transform edge
    transients; an envelope whose spread is negligible against its level is
    reported as 1.0 (the kurtosis lower bound).

    Raises:
        ConfigurationError: If the band is not inside (0, sample_rate / 2)
        DegenerateSignalError: If the signal is constant
    """
    low, high = band
    if not 0 < low < high < sig.sample_rate / 2:
        raise ConfigurationError(
            f"Envelope band ({low:g}, {high:g}) Hz must lie inside (0, {sig.sample_rate / 2:g}) Hz",
            config_key="envelope_band",
        )
    if np.ptp(sig.samples) == 0:
        raise DegenerateSignalError(f"Signal '{sig.id}' is constant", signal_id=sig.id)

    sos = sp_signal.butter(4, [low, high], btype="bandpass", output="sos", fs=sig.sample_rate)
    filtered = sp_signal.sosfiltfilt(sos, sig.samples)
    envelope = np.abs(sp_signal.hilbert(filtered))

    interior = envelope
    if envelope.size > 4 * ENVELOPE_EDGE_GUARD:
        interior = envelope[ENVELOPE_EDGE_GUARD:-ENVELOPE_EDGE_GUARD]
    level = float(interior.mean())
    if level == 0.0 or float(interior.std()) <= FLAT_ENVELOPE_RATIO * level:
        env_kurtosis = 1.0
    else:
        env_kurtosis = float(stats.kurtosis(interior, fisher=False, bias=True))

    spectrum = _framed_spectrum(
        envelope - envelope.mean(), sig.sample_rate, fft_size, SpectrumKind.ENVELOPE, sig.id
    )
    env_peak_freq = float(spectrum.freqs[1:][np.argmax(spectrum.magnitudes[1:])])
    return EnvelopeAnalysis(env_kurtosis=env_kurtosis, env_peak_freq=env_peak_freq, spectrum=spectrum)


# === Composition ===


def extract_all(sig: Signal, cfg: FeatureConfig | None = None) -> ExtractionResult:
    """
    Compute the full feature vector and the three spectra of one signal.

    Args:
        sig: Input signal
        cfg: Extraction settings (defaults when omitted)

    Returns:
        ExtractionResult with the FeatureVector and spectra keyed by kind
    """
    cfg = cfg or FeatureConfig()

    time_part = time_features(sig)
    fft = fft_spectrum(sig, cfg.fft_size)
    f_dom, f_c = freq_features(fft)
    order = order_features(sig, cfg.tau, cfg.max_harmonics, cfg)
    env = envelope_spectrum(sig, cfg.envelope_band, cfg.fft_size)

    features = FeatureVector(
        **time_part._asdict(),
        dominant_freq=f_dom,
        spectral_centroid=f_c,
        a1x=order.a1x,
        a2x=order.a2x,
        ratio_2x_1x=order.ratio_2x_1x,
        harmonic_count=order.harmonic_count,
        env_kurtosis=env.env_kurtosis,
        env_peak_freq=env.env_peak_freq,
        shaft_freq=sig.shaft_freq,
    )
    logger.debug(f"Extracted features for '{sig.id}'", extra={"sample_id": sig.id})
    return ExtractionResult(
        features=features,
        spectra={
            SpectrumKind.FFT: fft,
            SpectrumKind.ORDER: order.spectrum,
            SpectrumKind.ENVELOPE: env.spectrum,
        },
    )
