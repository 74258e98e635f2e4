"""
Desk-scale synthetic corpus: each "speaker" is a harmonic tone complex with a
slow syllable-rate envelope, its "accelerometer" is the same signal low-passed
and recorded at 4 kHz, and interferers are white-noise clips.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import List, Union

import numpy as np
from loguru import logger
from scipy import signal

from core.data.manifest import DatasetManifest, ManifestEntry, Scenario, load_manifest, write_manifest
from core.dsp.filters import resample
from core.dsp.waveform import Waveform
from core.errors import InvalidArgumentError
from integrations.wav_io import write_wav

ACCEL_CUTOFF_HZ = 1000.0
HARMONICS = 6


@dataclass
class ToyCorpus:
    root: Path
    manifest_path: Path
    noise_list_path: Path

    def load(self, scenario: Union[Scenario, str] = Scenario.MIXED_NOISE, mix_gain_db: float = 0.0) -> DatasetManifest:
        return load_manifest(self.manifest_path, self.noise_list_path, scenario, mix_gain_db)


def _tone_utterance(rng: np.random.Generator, f0: float, length: int, rate: int) -> np.ndarray:
    t = np.arange(length) / rate
    amplitudes = rng.uniform(0.2, 1.0, HARMONICS) / np.arange(1, HARMONICS + 1)
    phases = rng.uniform(0, 2 * np.pi, HARMONICS)
    voiced = sum(a * np.sin(2 * np.pi * f0 * (h + 1) * t + p) for h, (a, p) in enumerate(zip(amplitudes, phases)))
    syllable_hz = rng.uniform(2.5, 5.0)
    envelope = 0.55 + 0.45 * np.sin(2 * np.pi * syllable_hz * t + rng.uniform(0, 2 * np.pi))
    return 0.5 * envelope * voiced / np.max(np.abs(voiced))


def _accelerometer(clean: np.ndarray, rate: int, accel_rate: int) -> Waveform:
    sos = signal.butter(4, ACCEL_CUTOFF_HZ, btype="lowpass", fs=rate, output="sos")
    body = signal.sosfiltfilt(sos, clean)
    return resample(Waveform(body, rate), accel_rate)


def make_tone_corpus(
    out_dir: Union[str, Path],
    n_speakers: int = 2,
    utterances_per_speaker: int = 4,
    seconds: float = 1.024,
    sample_rate_hz: int = 16000,
    accel_rate_hz: int = 4000,
    n_noise_clips: int = 2,
    seed: int = 0,
) -> ToyCorpus:
    """Write clean/accel/noise WAVs plus ``manifest.jsonl`` and ``noise.txt`` under ``out_dir``"""
    if n_speakers < 1 or utterances_per_speaker < 1 or n_noise_clips < 1:
        raise InvalidArgumentError("toy corpus needs at least one speaker, utterance and noise clip")
    if sample_rate_hz % accel_rate_hz:
        raise InvalidArgumentError(f"accelerometer rate {accel_rate_hz} must divide {sample_rate_hz}")
    root = Path(out_dir)
    rng = np.random.default_rng(seed)
    step = sample_rate_hz // accel_rate_hz
    length = int(round(seconds * sample_rate_hz)) // step * step

    entries: List[ManifestEntry] = []
    f0s = np.linspace(110.0, 290.0, n_speakers)
    for s, f0 in enumerate(f0s):
        speaker = f"spk{s:02d}"
        for u in range(utterances_per_speaker):
            clean = _tone_utterance(rng, float(f0) * rng.uniform(0.95, 1.05), length, sample_rate_hz)
            clean_path = write_wav(root / "clean" / speaker / f"utt{u:02d}.wav", Waveform(clean, sample_rate_hz))
            accel_path = write_wav(
                root / "accel" / speaker / f"utt{u:02d}.wav",
                _accelerometer(clean, sample_rate_hz, accel_rate_hz),
            )
            entries.append(
                ManifestEntry(clean_path.relative_to(root), speaker, accel_path.relative_to(root))
            )

    noise_paths = []
    for n in range(n_noise_clips):
        noise = 0.3 * rng.standard_normal(2 * length)
        noise_paths.append(write_wav(root / "noise" / f"noise{n:02d}.wav", Waveform(noise, sample_rate_hz)))

    manifest_path = write_manifest(entries, root / "manifest.jsonl")
    noise_list_path = root / "noise.txt"
    noise_list_path.write_text("".join(f"{p.relative_to(root)}\n" for p in noise_paths), encoding="utf-8")
    logger.info(f"Wrote toy corpus to {root}: {len(entries)} utterances, {n_noise_clips} noise clips")
    return ToyCorpus(root, manifest_path, noise_list_path)
