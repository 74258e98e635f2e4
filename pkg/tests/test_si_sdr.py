#!/usr/bin/env python3
"""
Tests for SI-SDR and SI-SDR improvement
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import RATE
from core.dsp.waveform import Waveform
from core.errors import ShapeError, UndefinedMetricError
from core.metrics.si_sdr import MAX_DB, is_silent, mean_std, si_sdr, si_sdri


def _reference_si_sdr(estimate, reference):
    alpha = estimate @ reference / (reference @ reference)
    target = alpha * reference
    noise = estimate - target
    return 10 * math.log10((target @ target) / (noise @ noise))


class TestSiSdr:
    def test_half_projection_is_zero_db(self):
        assert si_sdr(np.array([1.0, 0.0]), np.array([1.0, 1.0])) == pytest.approx(0.0, abs=1e-6)

    def test_perfect_and_rescaled_estimates_hit_the_cap(self):
        reference = np.random.default_rng(0).standard_normal(1000)
        assert si_sdr(reference, reference) == MAX_DB
        assert si_sdr(2 * reference, reference) == MAX_DB

    def test_matches_direct_formula(self):
        rng = np.random.default_rng(1)
        for _ in range(100):
            reference = rng.standard_normal(1000)
            estimate = rng.uniform(0.1, 3) * reference + rng.uniform(0.05, 2) * rng.standard_normal(1000)
            assert si_sdr(estimate, reference) == pytest.approx(_reference_si_sdr(estimate, reference), abs=1e-6)

    @pytest.mark.parametrize("scale", [0.1, 1.0, 7.3])
    def test_scale_invariance(self, scale):
        rng = np.random.default_rng(2)
        reference = rng.standard_normal(800)
        estimate = reference + 0.5 * rng.standard_normal(800)
        base = si_sdr(estimate, reference)
        assert si_sdr(scale * estimate, reference) == pytest.approx(base, abs=1e-6)
        assert si_sdr(estimate, scale * reference) == pytest.approx(base, abs=1e-6)

    @settings(max_examples=40, deadline=None)
    @given(seed=st.integers(0, 2**16), scale=st.floats(0.01, 100))
    def test_scale_invariance_property(self, seed, scale):
        rng = np.random.default_rng(seed)
        reference = rng.standard_normal(256)
        estimate = reference + rng.standard_normal(256)
        assert si_sdr(scale * estimate, reference) == pytest.approx(si_sdr(estimate, reference), abs=1e-4)

    def test_more_orthogonal_noise_scores_lower(self):
        rng = np.random.default_rng(3)
        reference = rng.standard_normal(1024)
        noise = rng.standard_normal(1024)
        noise -= (noise @ reference) / (reference @ reference) * reference
        scores = [si_sdr(reference + a * noise, reference) for a in (0.1, 0.5, 1.0, 4.0)]
        assert scores == sorted(scores, reverse=True)
        assert si_sdr(reference + noise, reference) == pytest.approx(
            10 * math.log10((reference @ reference) / (noise @ noise)), abs=1e-6
        )

    def test_accepts_mono_waveforms(self):
        reference = Waveform(np.random.default_rng(4).standard_normal(300), RATE)
        assert si_sdr(reference, reference) == MAX_DB


class TestErrors:
    def test_silent_reference(self):
        assert is_silent(np.zeros(100))
        with pytest.raises(UndefinedMetricError):
            si_sdr(np.ones(100), np.zeros(100))

    def test_silent_estimate(self):
        with pytest.raises(UndefinedMetricError):
            si_sdr(np.zeros(100), np.ones(100))

    def test_length_mismatch(self):
        with pytest.raises(ShapeError):
            si_sdr(np.ones(100), np.ones(99))

    def test_multichannel_rejected(self):
        with pytest.raises(ShapeError):
            si_sdr(np.ones((2, 10)), np.ones((2, 10)))


class TestImprovement:
    def test_unchanged_input_has_no_improvement(self):
        rng = np.random.default_rng(5)
        clean = rng.standard_normal(500)
        noisy = clean + rng.standard_normal(500)
        assert si_sdri(noisy, noisy, clean) == 0.0

    def test_better_estimate_improves(self):
        rng = np.random.default_rng(6)
        clean = rng.standard_normal(500)
        noise = rng.standard_normal(500)
        noise -= (noise @ clean) / (clean @ clean) * clean
        assert si_sdri(clean + 0.1 * noise, clean + noise, clean) == pytest.approx(20.0, abs=1e-6)

    def test_mean_std(self):
        assert mean_std([1.0, 3.0]) == (2.0, 1.0)
        mean, std = mean_std([])
        assert math.isnan(mean) and math.isnan(std)


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
