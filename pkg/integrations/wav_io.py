"""
Thin wrapper around soundfile for reading and writing WAV files as Waveforms.
"""

from __future__ import annotations

from pathlib import Path
from typing import Union

import numpy as np
import soundfile as sf

from core.dsp.waveform import Waveform
from core.errors import AudioIOError, InvalidArgumentError

PathLike = Union[str, Path]

SUBTYPES = {"pcm16": "PCM_16", "float32": "FLOAT"}


def read_wav(path: PathLike) -> Waveform:
    """Decode a WAV file into float samples in [-1, 1], keeping every channel"""
    path = Path(path)
    try:
        data, rate = sf.read(str(path), dtype="float64", always_2d=True)
    except (RuntimeError, OSError) as e:
        raise AudioIOError(f"cannot read {path}: {e}") from e
    if data.shape[0] == 0:
        raise AudioIOError(f"{path} contains no samples")
    return Waveform(data.T, rate)


def write_wav(path: PathLike, w: Waveform, subtype: str = "float32") -> Path:
    """Write ``w`` as 16-bit PCM (``pcm16``) or 32-bit float (``float32``)"""
    if subtype not in SUBTYPES:
        raise InvalidArgumentError(f"unknown WAV subtype {subtype!r}; choose from {sorted(SUBTYPES)}")
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        sf.write(str(path), np.ascontiguousarray(w.samples.T), w.sample_rate_hz, subtype=SUBTYPES[subtype])
    except (RuntimeError, OSError) as e:
        raise AudioIOError(f"cannot write {path}: {e}") from e
    return path
