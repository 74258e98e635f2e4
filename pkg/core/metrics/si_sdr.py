"""
Scale-invariant signal-to-distortion ratio.

The estimate is projected onto the reference without mean subtraction:
alpha = <e, r> / |r|^2, target = alpha * r, and
SI-SDR = 10 log10(|target|^2 / (|e - target|^2 + EPS)), capped at MAX_DB.
"""

from __future__ import annotations

from typing import Sequence, Tuple, Union

import numpy as np

from core.dsp.waveform import Waveform
from core.errors import ShapeError, UndefinedMetricError

EPS = 1e-8
MAX_DB = 100.0
SILENCE_RMS = 1e-5

Signal = Union[Waveform, np.ndarray]


def _flat(x: Signal) -> np.ndarray:
    if isinstance(x, Waveform):
        return x.mono()
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 2 and x.shape[0] == 1:
        x = x[0]
    if x.ndim != 1:
        raise ShapeError(f"SI-SDR compares mono signals, got shape {x.shape}")
    return x


def rms(x: Signal) -> float:
    x = _flat(x)
    return float(np.sqrt(np.mean(x ** 2))) if x.size else 0.0


def is_silent(reference: Signal) -> bool:
    return rms(reference) < SILENCE_RMS


def si_sdr(estimate: Signal, reference: Signal) -> float:
    e, r = _flat(estimate), _flat(reference)
    if e.shape != r.shape:
        raise ShapeError(f"estimate has {e.size} samples, reference {r.size}")
    ref_energy = float(np.dot(r, r))
    if ref_energy <= EPS:
        raise UndefinedMetricError("SI-SDR is undefined for a silent reference")
    if float(np.dot(e, e)) <= EPS:
        raise UndefinedMetricError("SI-SDR is undefined for a silent estimate")
    alpha = float(np.dot(e, r)) / ref_energy
    target = alpha * r
    residual = e - target
    value = 10.0 * np.log10(float(np.dot(target, target)) / (float(np.dot(residual, residual)) + EPS))
    return float(min(value, MAX_DB))


def si_sdri(estimate: Signal, noisy_input: Signal, reference: Signal) -> float:
    """Improvement of ``estimate`` over ``noisy_input``, both scored against ``reference``"""
    return si_sdr(estimate, reference) - si_sdr(noisy_input, reference)


def mean_std(values: Sequence[float]) -> Tuple[float, float]:
    """Mean and population standard deviation; NaN for an empty sequence"""
    if len(values) == 0:
        return float("nan"), float("nan")
    arr = np.asarray(values, dtype=np.float64)
    return float(arr.mean()), float(arr.std())
