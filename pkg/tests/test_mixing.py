#!/usr/bin/env python3
"""
Tests for mixture construction and training-example cropping
"""

from pathlib import Path

import numpy as np
import pytest
from scipy import signal

from conftest import RATE
from core.data.manifest import DatasetManifest, ManifestEntry
from core.data.mixing import (
    ExampleFactory,
    ExampleSettings,
    TrainingExample,
    UtteranceMixture,
    db_to_gain,
    fit_interferer,
    mix,
)
from core.dsp.waveform import Waveform
from core.errors import (
    AlignmentError,
    ConfigurationError,
    InvalidArgumentError,
    MissingModalityError,
    ShapeError,
    UntrainedModelError,
)
from core.metrics.si_sdr import si_sdr
from core.model.generator import Generator
from core.model.specs import GeneratorSpec
from integrations.wav_io import write_wav


class TestMix:
    def test_gain_and_tiling(self):
        clean = Waveform(np.full(5, 0.1), RATE)
        interferer = Waveform(np.array([1.0, -1.0]), RATE)
        out = mix(clean, interferer, gain_db=20.0)
        assert np.allclose(out.samples[0], 0.1 + 10.0 * np.array([1, -1, 1, -1, 1]))

    def test_db_to_gain(self):
        assert db_to_gain(0.0) == 1.0
        assert db_to_gain(-20.0) == pytest.approx(0.1)

    def test_long_interferer_is_cropped_inside_bounds(self):
        source = np.arange(100.0)
        cropped = fit_interferer(source, 10, np.random.default_rng(5))
        assert cropped.shape == (1, 10)
        assert np.array_equal(np.diff(cropped[0]), np.ones(9))
        assert 0 <= cropped[0, 0] <= 90

    def test_no_clipping(self):
        out = mix(Waveform(np.full(4, 0.9), RATE), Waveform(np.full(4, 0.9), RATE))
        assert np.allclose(out.samples, 1.8)

    def test_rate_mismatch(self):
        with pytest.raises(InvalidArgumentError):
            mix(Waveform(np.zeros(4), RATE), Waveform(np.zeros(4), 8000))

    def test_mixture_must_reconstruct(self):
        w = Waveform(np.ones(256), RATE)
        with pytest.raises(ShapeError):
            UtteranceMixture(x_m=w, x_a=w, y_m=w, interferer=w, gain=1.0)

    def test_training_example_length_is_stride_multiple(self):
        zeros = Waveform(np.zeros(300), RATE)
        with pytest.raises(ShapeError):
            TrainingExample(x_m=zeros, x_a=zeros, y_m=zeros, interferer=zeros, gain=1.0)


class TestExampleFactory:
    def test_example_shapes_and_determinism(self, noise_manifest):
        factory = ExampleFactory(noise_manifest)
        entry = noise_manifest.entries[0]
        first = factory.make_example(entry, crop_length=4096, rng_seed=3)
        second = ExampleFactory(noise_manifest).make_example(entry, crop_length=4096, rng_seed=3)
        for name in ("x_m", "x_a", "y_m"):
            assert getattr(first, name).samples.shape == (1, 4096)
            assert np.array_equal(getattr(first, name).samples, getattr(second, name).samples)
        assert first.example_id == "spk00-utt00"
        assert Path(first.interferer_id) in noise_manifest.noise_sources

    @pytest.mark.parametrize("cache_size", [0, 2])
    def test_source_cache_is_bounded(self, noise_manifest, cache_size):
        bounded = ExampleFactory(noise_manifest, cache_size=cache_size)
        unbounded = ExampleFactory(noise_manifest)
        for _ in range(2):
            for index, entry in enumerate(noise_manifest.entries):
                small = bounded.make_example(entry, crop_length=4096, rng_seed=index)
                assert bounded.cached_sources <= cache_size
                full = unbounded.make_example(entry, crop_length=4096, rng_seed=index)
                assert np.array_equal(small.x_m.samples, full.x_m.samples)
                assert np.array_equal(small.x_a.samples, full.x_a.samples)
        assert unbounded.cached_sources > cache_size

    def test_negative_cache_size(self, noise_manifest):
        with pytest.raises(InvalidArgumentError):
            ExampleFactory(noise_manifest, cache_size=-1)

    def test_short_utterance_is_padded(self, noise_manifest):
        example = ExampleFactory(noise_manifest).make_example(noise_manifest.entries[0], crop_length=16384)
        assert example.length == 16384

    def test_bad_crop_length(self, noise_manifest):
        with pytest.raises(InvalidArgumentError):
            ExampleFactory(noise_manifest).make_example(noise_manifest.entries[0], crop_length=1000)

    def test_mixed_speech_uses_another_speaker(self, speech_manifest):
        factory = ExampleFactory(speech_manifest)
        entry = speech_manifest.entries[0]
        for seed in range(5):
            mixture = factory.build_mixture(entry, rng_seed=seed)
            assert speech_manifest.entry_for_path(mixture.interferer_id).speaker_id != entry.speaker_id

    def test_same_speaker_interferer_rejected(self, speech_manifest):
        entry, same_speaker = speech_manifest.entries[0], speech_manifest.entries[1]
        assert entry.speaker_id == same_speaker.speaker_id
        with pytest.raises(ConfigurationError):
            ExampleFactory(speech_manifest).build_mixture(entry, interferer_choice=same_speaker.clean_path)

    def test_zero_db_mixtures_are_balanced(self, noise_manifest):
        factory = ExampleFactory(noise_manifest)
        scores = [si_sdr(factory.build_mixture(e).x_m, factory.build_mixture(e).y_m) for e in noise_manifest.entries]
        assert -5.0 <= np.mean(scores) <= 5.0

    def test_accelerometer_is_aligned(self, noise_manifest):
        mixture = ExampleFactory(noise_manifest).build_mixture(noise_manifest.entries[1])
        x_a, y_m = mixture.x_a.mono(), mixture.y_m.mono()
        corr = signal.correlate(x_a, y_m, mode="full")
        lags = signal.correlation_lags(len(x_a), len(y_m), mode="full")
        assert abs(lags[np.argmax(corr)]) <= 1

    def test_decimation_removes_high_band(self, noise_manifest):
        entry = noise_manifest.entries[0]
        full = ExampleFactory(noise_manifest).build_mixture(entry).x_a
        limited = ExampleFactory(noise_manifest, ExampleSettings(decimation_factor=40)).build_mixture(entry).x_a
        freqs, psd_full = signal.welch(full.mono(), fs=RATE, nperseg=1024)
        _, psd_limited = signal.welch(limited.mono(), fs=RATE, nperseg=1024)
        high = freqs > 400
        assert psd_full[high].sum() > 0
        assert psd_limited[high].sum() < 1e-2 * psd_full[high].sum()

    def test_audio_only_conditioning_is_silent(self, noise_manifest):
        factory = ExampleFactory(noise_manifest, ExampleSettings(use_accel=False, accel_channels=(0, 1)))
        mixture = factory.build_mixture(noise_manifest.entries[0])
        assert mixture.x_a.channels == 2
        assert not mixture.x_a.samples.any()


class TestAccelerometerSources:
    @pytest.fixture
    def audio_only_manifest(self, noise_manifest):
        entries = [ManifestEntry(e.clean_path, e.speaker_id) for e in noise_manifest.entries]
        return DatasetManifest(entries, noise_manifest.noise_sources)

    def test_missing_accel_raises(self, audio_only_manifest):
        with pytest.raises(MissingModalityError):
            ExampleFactory(audio_only_manifest).make_example(audio_only_manifest.entries[0], crop_length=4096)

    def test_missing_accel_allowed_gives_silence(self, audio_only_manifest):
        factory = ExampleFactory(audio_only_manifest, ExampleSettings(require_accel=False))
        example = factory.make_example(audio_only_manifest.entries[0], crop_length=4096)
        assert not example.x_a.samples.any()

    def test_untrained_synthesis_model_rejected(self, audio_only_manifest):
        model = Generator(GeneratorSpec.accel_synth(base_channels=4))
        factory = ExampleFactory(audio_only_manifest, accel_synth=model)
        with pytest.raises(UntrainedModelError):
            factory.make_example(audio_only_manifest.entries[0], crop_length=4096)

    def test_trained_synthesis_model_fills_conditioning(self, audio_only_manifest):
        model = Generator(GeneratorSpec.accel_synth(base_channels=4))
        model.trained_steps.fill_(1)
        factory = ExampleFactory(audio_only_manifest, accel_synth=model)
        example = factory.make_example(audio_only_manifest.entries[0], crop_length=4096)
        assert example.x_a.samples.shape == (1, 4096)
        assert example.x_a.samples.any()

    def test_misaligned_recordings(self, tmp_path):
        clean = write_wav(tmp_path / "c.wav", Waveform(np.random.default_rng(0).standard_normal(RATE) * 0.1, RATE))
        accel = write_wav(tmp_path / "a.wav", Waveform(np.random.default_rng(1).standard_normal(2000) * 0.1, 4000))
        noise = write_wav(tmp_path / "n.wav", Waveform(np.random.default_rng(2).standard_normal(RATE) * 0.1, RATE))
        manifest = DatasetManifest([ManifestEntry(clean, "s", accel)], [noise])
        with pytest.raises(AlignmentError):
            ExampleFactory(manifest).build_mixture(manifest.entries[0])


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
