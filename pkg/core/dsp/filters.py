"""
Deterministic filtering, normalization and resampling.

All functions are pure: they return new Waveforms and never touch their inputs.
"""

from __future__ import annotations

from math import gcd

import numpy as np
from scipy import signal

from core.dsp.waveform import Waveform
from core.errors import InvalidArgumentError

HIGH_PASS_CUTOFF_HZ = 20.0
HIGH_PASS_ORDER = 2
NORMALIZE_QUANTILE = 0.9999
NORMALIZE_HEADROOM = 1.1
SILENCE_QUANTILE = 1e-8
# Kaiser beta 8.6 gives roughly 85 dB of stopband attenuation
RESAMPLE_WINDOW = ("kaiser", 8.6)


def high_pass(w: Waveform, cutoff_hz: float = HIGH_PASS_CUTOFF_HZ, order: int = HIGH_PASS_ORDER) -> Waveform:
    """Zero-phase Butterworth high-pass (forward-backward), applied per channel"""
    nyquist = w.sample_rate_hz / 2
    if not 0 < cutoff_hz < nyquist:
        raise InvalidArgumentError(
            f"high-pass cutoff {cutoff_hz} Hz must lie in (0, {nyquist}) for rate {w.sample_rate_hz} Hz"
        )
    sos = signal.butter(order, cutoff_hz, btype="highpass", fs=w.sample_rate_hz, output="sos")
    # sosfiltfilt refuses inputs shorter than its default edge padding
    padlen = min(3 * (2 * len(sos) + 1), w.length - 1)
    filtered = signal.sosfiltfilt(sos, w.samples, axis=-1, padlen=padlen)
    return w.with_samples(filtered)


def normalize(
    w: Waveform,
    quantile: float = NORMALIZE_QUANTILE,
    headroom: float = NORMALIZE_HEADROOM,
) -> Waveform:
    """Divide each channel by headroom * quantile(|x|) and clip to [-1, 1].

    Channels whose quantile is (near) zero are returned unchanged.
    """
    if w.length == 0:
        raise InvalidArgumentError("cannot normalize an empty waveform")
    q = np.quantile(np.abs(w.samples), quantile, axis=-1, keepdims=True)
    silent = q < SILENCE_QUANTILE
    divisor = np.where(silent, 1.0, headroom * q)
    scaled = np.clip(w.samples / divisor, -1.0, 1.0)
    out = np.where(silent, w.samples, scaled)
    return w.with_samples(out)


def resample(w: Waveform, target_rate_hz: int) -> Waveform:
    """Band-limited polyphase resampling to ``target_rate_hz``"""
    if int(target_rate_hz) <= 0:
        raise InvalidArgumentError(f"target rate must be positive, got {target_rate_hz}")
    target_rate_hz = int(target_rate_hz)
    if target_rate_hz == w.sample_rate_hz:
        return w.copy()
    common = gcd(target_rate_hz, w.sample_rate_hz)
    up, down = target_rate_hz // common, w.sample_rate_hz // common
    out = signal.resample_poly(w.samples, up, down, axis=-1, window=RESAMPLE_WINDOW)
    return Waveform(out, target_rate_hz)


def band_limit(w: Waveform, factor: int) -> Waveform:
    """Simulate a sensor sampled ``factor`` times slower.

    Anti-alias filter, decimate by ``factor`` and interpolate back, so the
    result keeps the original rate and length.
    """
    factor = int(factor)
    if factor < 1:
        raise InvalidArgumentError(f"decimation factor must be >= 1, got {factor}")
    if w.sample_rate_hz / factor < 2:
        raise InvalidArgumentError(
            f"decimation factor {factor} leaves less than 2 Hz of rate at {w.sample_rate_hz} Hz"
        )
    if factor == 1:
        return w.copy()
    decimated = signal.resample_poly(w.samples, 1, factor, axis=-1, window=RESAMPLE_WINDOW)
    restored = signal.resample_poly(decimated, factor, 1, axis=-1, window=RESAMPLE_WINDOW)
    return w.with_samples(restored[:, : w.length])


def simulated_rate_hz(sample_rate_hz: int, factor: int) -> float:
    """Sampling rate of the sensor that ``band_limit(w, factor)`` imitates"""
    return sample_rate_hz / factor
