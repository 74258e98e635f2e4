#!/usr/bin/env python3
"""
Common test configuration and fixtures for the SEANet project
"""

import sys
from pathlib import Path

# Add project root to path
sys.path.insert(0, str(Path(__file__).parent.parent))

import numpy as np
import pytest

from core.data.toy_corpus import make_tone_corpus
from core.dsp.waveform import Waveform
from core.model.specs import DiscriminatorSpec, GeneratorSpec

RATE = 16000


@pytest.fixture(scope="session")
def toy_corpus(tmp_path_factory):
    """2 speakers x 2 utterances of 0.512 s with 4 kHz accelerometer recordings"""
    return make_tone_corpus(
        tmp_path_factory.mktemp("toy"), n_speakers=2, utterances_per_speaker=2, seconds=0.512, seed=0
    )


@pytest.fixture
def noise_manifest(toy_corpus):
    return toy_corpus.load("mixed_noise")


@pytest.fixture
def speech_manifest(toy_corpus):
    return toy_corpus.load("mixed_speech")


@pytest.fixture
def tiny_generator_spec():
    return GeneratorSpec(base_channels=4)


@pytest.fixture
def tiny_discriminator_spec():
    return DiscriminatorSpec(base_channels=4, max_channels=32)


def tone(freq_hz, seconds=1.0, rate=RATE, amplitude=0.5):
    t = np.arange(int(seconds * rate)) / rate
    return Waveform(amplitude * np.sin(2 * np.pi * freq_hz * t), rate)
