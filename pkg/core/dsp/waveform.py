from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from core.errors import InvalidArgumentError, ShapeError


@dataclass
class Waveform:
    """Sampled signal, stored channel-major as a (channels, length) float64 array"""

    samples: np.ndarray
    sample_rate_hz: int

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim == 1:
            samples = samples[np.newaxis, :]
        if samples.ndim != 2:
            raise ShapeError(f"waveform samples must be 1-D or (channels, length), got {samples.shape}")
        if samples.shape[0] < 1:
            raise ShapeError("waveform needs at least one channel")
        if int(self.sample_rate_hz) <= 0:
            raise InvalidArgumentError(f"sample rate must be positive, got {self.sample_rate_hz}")
        self.samples = samples
        self.sample_rate_hz = int(self.sample_rate_hz)

    @property
    def channels(self) -> int:
        return self.samples.shape[0]

    @property
    def length(self) -> int:
        return self.samples.shape[1]

    @property
    def duration_s(self) -> float:
        return self.length / self.sample_rate_hz

    def mono(self) -> np.ndarray:
        """Samples of a single-channel waveform as a flat array"""
        if self.channels != 1:
            raise ShapeError(f"expected a mono waveform, got {self.channels} channels")
        return self.samples[0]

    def with_samples(self, samples: np.ndarray) -> "Waveform":
        return Waveform(samples, self.sample_rate_hz)

    def crop(self, start: int, length: int) -> "Waveform":
        return self.with_samples(self.samples[:, start:start + length])

    def copy(self) -> "Waveform":
        return self.with_samples(self.samples.copy())

    @classmethod
    def silence(cls, length: int, sample_rate_hz: int, channels: int = 1) -> "Waveform":
        return cls(np.zeros((channels, length)), sample_rate_hz)


def select_channels(w: Waveform, channels: Sequence[int]) -> Waveform:
    """Keep the given channels (accelerometer axes) in the given order"""
    channels = list(channels)
    if not channels:
        raise InvalidArgumentError("at least one channel must be selected")
    for index in channels:
        if not 0 <= index < w.channels:
            raise InvalidArgumentError(f"channel {index} out of range for a {w.channels}-channel waveform")
    return w.with_samples(w.samples[channels])


def pad_to_multiple(w: Waveform, multiple: int) -> Tuple[Waveform, int]:
    """Zero-pad at the end so the length is a multiple of ``multiple``"""
    if multiple < 1:
        raise InvalidArgumentError(f"multiple must be >= 1, got {multiple}")
    original = w.length
    missing = (-original) % multiple
    if missing == 0:
        return w, original
    padded = np.pad(w.samples, ((0, 0), (0, missing)))
    return w.with_samples(padded), original


def trim(w: Waveform, length: int) -> Waveform:
    return w.with_samples(w.samples[:, :length])


def fit_length(w: Waveform, length: int) -> Waveform:
    """Trim, or zero-pad at the end, to exactly ``length`` samples"""
    if w.length >= length:
        return trim(w, length)
    return w.with_samples(np.pad(w.samples, ((0, 0), (0, length - w.length))))
