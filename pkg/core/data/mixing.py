"""
Mixing clean speech with interferers and cutting aligned training examples.

Preprocessing order for every source: high-pass -> normalize -> (resample
the accelerometer to the audio rate) -> mix -> crop. The clean target is
therefore the normalized clean recording, exactly what evaluation compares
against.
"""

from __future__ import annotations

from collections import OrderedDict
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, Optional, Sequence, Tuple

import numpy as np
from loguru import logger

from core.data.manifest import DatasetManifest, ManifestEntry, Scenario
from core.dsp.filters import band_limit, high_pass, normalize, resample
from core.dsp.waveform import Waveform, fit_length, select_channels
from core.errors import (
    AlignmentError,
    ConfigurationError,
    InvalidArgumentError,
    MissingModalityError,
    ShapeError,
)
from core.model.specs import TOTAL_STRIDE
from integrations.wav_io import read_wav

DEFAULT_CROP_LENGTH = 16384
# decoded sources kept per factory (and per loader worker)
DEFAULT_CACHE_SIZE = 256
RECONSTRUCTION_TOLERANCE = 1e-6


def db_to_gain(gain_db: float) -> float:
    return float(10.0 ** (gain_db / 20.0))


def fit_interferer(interferer: np.ndarray, length: int, rng: Optional[np.random.Generator] = None) -> np.ndarray:
    """Crop (random offset) a long interferer or tile a short one to ``length`` samples"""
    interferer = np.atleast_2d(interferer)
    available = interferer.shape[-1]
    if available >= length:
        offset = int(rng.integers(0, available - length + 1)) if rng is not None else 0
        return interferer[:, offset:offset + length]
    repeats = -(-length // available)
    return np.tile(interferer, (1, repeats))[:, :length]


def _mix_parts(
    clean: Waveform,
    interferer: Waveform,
    gain_db: float,
    rng: Optional[np.random.Generator],
) -> Tuple[Waveform, Waveform, float]:
    if clean.sample_rate_hz != interferer.sample_rate_hz:
        raise InvalidArgumentError(
            f"cannot mix {clean.sample_rate_hz} Hz speech with a {interferer.sample_rate_hz} Hz interferer"
        )
    if interferer.length == 0:
        raise InvalidArgumentError("interferer is empty")
    if interferer.channels not in (1, clean.channels):
        raise ShapeError(f"interferer has {interferer.channels} channels, speech has {clean.channels}")
    fitted = clean.with_samples(
        np.array(np.broadcast_to(fit_interferer(interferer.samples, clean.length, rng), clean.samples.shape))
    )
    gain = db_to_gain(gain_db)
    # no clipping: the mixture may leave [-1, 1]
    mixed = clean.with_samples(clean.samples + gain * fitted.samples)
    return mixed, fitted, gain


def mix(
    clean: Waveform,
    interferer: Waveform,
    gain_db: float = 0.0,
    rng: Optional[np.random.Generator] = None,
) -> Waveform:
    """clean + 10^(gain_db/20) * interferer fitted to the clean length"""
    mixed, _, _ = _mix_parts(clean, interferer, gain_db, rng)
    return mixed


@dataclass
class UtteranceMixture:
    """Aligned (noisy, conditioning, clean) signals for a whole utterance"""

    x_m: Waveform
    x_a: Waveform
    y_m: Waveform
    interferer: Waveform
    gain: float
    example_id: str = ""
    interferer_id: str = ""

    def __post_init__(self):
        streams = (self.x_m, self.x_a, self.y_m, self.interferer)
        if len({s.sample_rate_hz for s in streams}) != 1:
            raise ShapeError(f"{self.example_id}: streams disagree on sample rate")
        if len({s.length for s in streams}) != 1:
            raise ShapeError(f"{self.example_id}: streams disagree on length")
        if self.x_m.channels != 1 or self.y_m.channels != 1:
            raise ShapeError(f"{self.example_id}: noisy and clean speech must be mono")
        residual = self.x_m.samples - (self.y_m.samples + self.gain * self.interferer.samples)
        if residual.size and np.max(np.abs(residual)) > RECONSTRUCTION_TOLERANCE:
            raise ShapeError(f"{self.example_id}: noisy speech is not clean + gain * interferer")

    @property
    def length(self) -> int:
        return self.y_m.length

    @property
    def sample_rate_hz(self) -> int:
        return self.y_m.sample_rate_hz

    def crop(self, start: int, length: int) -> "TrainingExample":
        return TrainingExample(
            x_m=self.x_m.crop(start, length),
            x_a=self.x_a.crop(start, length),
            y_m=self.y_m.crop(start, length),
            interferer=self.interferer.crop(start, length),
            gain=self.gain,
            example_id=self.example_id,
            interferer_id=self.interferer_id,
        )


@dataclass
class TrainingExample(UtteranceMixture):
    """A fixed-length crop whose length is a multiple of the generator's total stride"""

    def __post_init__(self):
        super().__post_init__()
        if self.length == 0 or self.length % TOTAL_STRIDE:
            raise ShapeError(f"example length {self.length} is not a positive multiple of {TOTAL_STRIDE}")


@dataclass
class SynthesisPair:
    """Clean audio (input) and its accelerometer recording (target), for the audio->accel model"""

    source: Waveform
    target: Waveform
    example_id: str = ""


@dataclass
class ExampleSettings:
    sample_rate_hz: int = 16000
    high_pass_hz: float = 20.0
    accel_channels: Tuple[int, ...] = (0,)
    decimation_factor: int = 1
    use_accel: bool = True
    require_accel: bool = True
    freeze_examples: bool = False

    def __post_init__(self):
        self.accel_channels = tuple(int(c) for c in self.accel_channels)
        if not self.accel_channels:
            raise ConfigurationError("at least one accelerometer channel must be selected")
        if self.decimation_factor < 1:
            raise InvalidArgumentError(f"decimation factor must be >= 1, got {self.decimation_factor}")

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["accel_channels"] = list(self.accel_channels)
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ExampleSettings":
        return cls(**data)


@dataclass
class ExampleFactory:
    """Builds mixtures and crops from a manifest; deterministic given a seed"""

    manifest: DatasetManifest
    settings: ExampleSettings = field(default_factory=ExampleSettings)
    accel_synth: Optional[Any] = None
    cache_size: int = DEFAULT_CACHE_SIZE
    _cache: "OrderedDict[Tuple[str, str], Waveform]" = field(default_factory=OrderedDict, init=False, repr=False)

    def __post_init__(self):
        if self.cache_size < 0:
            raise InvalidArgumentError(f"cache size must be >= 0, got {self.cache_size}")

    def with_settings(self, **changes) -> "ExampleFactory":
        return ExampleFactory(self.manifest, replace(self.settings, **changes), self.accel_synth, self.cache_size)

    @property
    def cached_sources(self) -> int:
        return len(self._cache)

    def _recall(self, key: Tuple[str, str]) -> Optional[Waveform]:
        w = self._cache.get(key)
        if w is not None:
            self._cache.move_to_end(key)
        return w

    def _remember(self, key: Tuple[str, str], w: Waveform) -> Waveform:
        """Store ``w``, evicting the least recently used sources beyond ``cache_size``"""
        self._cache[key] = w
        self._cache.move_to_end(key)
        while len(self._cache) > self.cache_size:
            self._cache.popitem(last=False)
        return w

    # -- sources -------------------------------------------------------------

    def _prepare(self, w: Waveform) -> Waveform:
        return normalize(high_pass(w, self.settings.high_pass_hz))

    def load_audio(self, path: Path) -> Waveform:
        key = ("audio", str(path))
        cached = self._recall(key)
        if cached is not None:
            return cached
        w = select_channels(read_wav(path), [0])
        if w.sample_rate_hz != self.settings.sample_rate_hz:
            w = resample(w, self.settings.sample_rate_hz)
        return self._remember(key, self._prepare(w))

    def load_accel(self, entry: ManifestEntry, clean: Waveform, channels: Optional[Sequence[int]] = None) -> Waveform:
        """Accelerometer aligned to ``clean``: recorded if available, otherwise synthesized"""
        channels = tuple(channels) if channels is not None else self.settings.accel_channels
        key = ("accel", f"{entry.clean_path}|{channels}")
        cached = self._recall(key)
        if cached is not None:
            return cached
        if entry.has_accel:
            raw = select_channels(read_wav(entry.accel_path), channels)
            period_s = 1.0 / raw.sample_rate_hz
            if abs(raw.duration_s - clean.duration_s) > period_s + 1e-9:
                raise AlignmentError(
                    f"{entry.example_id}: accelerometer lasts {raw.duration_s:.4f}s, audio {clean.duration_s:.4f}s"
                )
            accel = resample(self._prepare(raw), clean.sample_rate_hz)
        elif self.accel_synth is not None:
            from core.data.accel_synth import synthesize_accelerometer

            accel = synthesize_accelerometer(clean, self.accel_synth)
            accel = accel.with_samples(np.repeat(accel.samples, len(channels), axis=0))
        elif self.settings.require_accel:
            raise MissingModalityError(f"{entry.example_id} has no accel_path and no synthesis model was given")
        else:
            logger.warning(f"{entry.example_id}: no accelerometer recording, conditioning on silence")
            accel = Waveform.silence(clean.length, clean.sample_rate_hz, len(channels))
        return self._remember(key, fit_length(accel, clean.length))

    def choose_interferer(
        self,
        entry: ManifestEntry,
        interferer_choice: Optional[Path],
        rng: np.random.Generator,
    ) -> Path:
        pool = self.manifest.interferer_pool(entry)
        if interferer_choice is None:
            return pool[int(rng.integers(len(pool)))]
        if self.manifest.scenario is Scenario.MIXED_SPEECH:
            other = self.manifest.entry_for_path(interferer_choice)
            if other is not None and other.speaker_id == entry.speaker_id:
                raise ConfigurationError(f"interferer {interferer_choice} is spoken by the target speaker")
        return Path(interferer_choice)

    # -- examples ------------------------------------------------------------

    def _build(
        self, entry: ManifestEntry, interferer_choice: Optional[Path], rng: np.random.Generator
    ) -> UtteranceMixture:
        clean = self.load_audio(Path(entry.clean_path))
        if self.settings.use_accel:
            accel = self.load_accel(entry, clean)
            if self.settings.decimation_factor > 1:
                accel = band_limit(accel, self.settings.decimation_factor)
        else:
            accel = Waveform.silence(clean.length, clean.sample_rate_hz, len(self.settings.accel_channels))
        interferer_path = self.choose_interferer(entry, interferer_choice, rng)
        interferer = self.load_audio(interferer_path)
        noisy, fitted, gain = _mix_parts(clean, interferer, self.manifest.mix_gain_db, rng)
        return UtteranceMixture(
            x_m=noisy,
            x_a=accel,
            y_m=clean,
            interferer=fitted,
            gain=gain,
            example_id=entry.example_id,
            interferer_id=str(interferer_path),
        )

    def build_mixture(
        self,
        entry: ManifestEntry,
        interferer_choice: Optional[Path] = None,
        rng_seed: int = 0,
    ) -> UtteranceMixture:
        """Full-utterance mixture (no crop)"""
        return self._build(entry, interferer_choice, np.random.default_rng(rng_seed))

    def make_example(
        self,
        entry: ManifestEntry,
        interferer_choice: Optional[Path] = None,
        crop_length: int = DEFAULT_CROP_LENGTH,
        rng_seed: int = 0,
    ) -> TrainingExample:
        if crop_length <= 0 or crop_length % TOTAL_STRIDE:
            raise InvalidArgumentError(f"crop length {crop_length} must be a positive multiple of {TOTAL_STRIDE}")
        rng = np.random.default_rng(rng_seed)
        mixture = self._build(entry, interferer_choice, rng)
        if mixture.length < crop_length:
            mixture = _pad_mixture(mixture, crop_length)
        start = int(rng.integers(0, mixture.length - crop_length + 1))
        return mixture.crop(start, crop_length)

    def make_synthesis_pair(
        self, entry: ManifestEntry, crop_length: int = DEFAULT_CROP_LENGTH, rng_seed: int = 0
    ) -> SynthesisPair:
        if not entry.has_accel:
            raise MissingModalityError(f"{entry.example_id} has no accelerometer recording to learn from")
        if crop_length <= 0 or crop_length % TOTAL_STRIDE:
            raise InvalidArgumentError(f"crop length {crop_length} must be a positive multiple of {TOTAL_STRIDE}")
        rng = np.random.default_rng(rng_seed)
        clean = self.load_audio(Path(entry.clean_path))
        accel = self.load_accel(entry, clean, channels=self.settings.accel_channels[:1])
        length = max(clean.length, crop_length)
        clean, accel = fit_length(clean, length), fit_length(accel, length)
        start = int(rng.integers(0, clean.length - crop_length + 1))
        return SynthesisPair(clean.crop(start, crop_length), accel.crop(start, crop_length), entry.example_id)


def _pad_mixture(mixture: UtteranceMixture, length: int) -> UtteranceMixture:
    return UtteranceMixture(
        x_m=fit_length(mixture.x_m, length),
        x_a=fit_length(mixture.x_a, length),
        y_m=fit_length(mixture.y_m, length),
        interferer=fit_length(mixture.interferer, length),
        gain=mixture.gain,
        example_id=mixture.example_id,
        interferer_id=mixture.interferer_id,
    )
