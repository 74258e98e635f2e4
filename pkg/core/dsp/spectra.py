from __future__ import annotations

from typing import Tuple

import numpy as np
from scipy import signal

from core.dsp.waveform import Waveform


def power_spectral_density(w: Waveform, nperseg: int = 1024) -> Tuple[np.ndarray, np.ndarray]:
    """Welch PSD per channel: returns (freqs_hz, psd[channels, freqs])"""
    nperseg = min(nperseg, w.length)
    freqs, psd = signal.welch(w.samples, fs=w.sample_rate_hz, nperseg=nperseg, axis=-1)
    return freqs, psd


def tone_power(samples: np.ndarray, sample_rate_hz: int, freq_hz: float) -> float:
    """Power of a single frequency component, measured by projection on a complex exponential"""
    samples = np.asarray(samples, dtype=np.float64)
    t = np.arange(samples.shape[-1]) / sample_rate_hz
    phasor = np.exp(-2j * np.pi * freq_hz * t)
    amplitude = 2.0 * np.abs(np.dot(samples, phasor)) / samples.shape[-1]
    return float(amplitude ** 2 / 2.0)
