"""
Diagnostic figures rendered to image files with matplotlib (headless backend).
"""

from __future__ import annotations

from pathlib import Path
from typing import Dict, Mapping, Sequence, Union

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from core.dsp.filters import simulated_rate_hz  # noqa: E402
from core.dsp.spectra import power_spectral_density  # noqa: E402
from core.dsp.waveform import Waveform  # noqa: E402

PathLike = Union[str, Path]


def plot_decimation_sweep(results: Sequence, path: PathLike, sample_rate_hz: int = 16000) -> Path:
    """SI-SDRi (mean +- std) against the simulated accelerometer sampling rate, one line per scenario"""
    by_scenario: Dict[str, list] = {}
    for result in results:
        by_scenario.setdefault(result.scenario, []).append(result)

    fig, ax = plt.subplots(figsize=(6, 4))
    for scenario, rows in sorted(by_scenario.items()):
        rows = sorted(rows, key=lambda r: r.decimation_factor, reverse=True)
        rates = [simulated_rate_hz(sample_rate_hz, r.decimation_factor) for r in rows]
        ax.errorbar(
            rates,
            [r.mean_si_sdri for r in rows],
            yerr=[r.std_si_sdri for r in rows],
            marker="o",
            capsize=3,
            label=scenario.replace("_", " "),
        )
    ax.set_xscale("log")
    ax.set_xlabel("accelerometer sampling rate [Hz]")
    ax.set_ylabel("SI-SDRi [dB]")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    return _save(fig, path)


def plot_psd(waveforms: Mapping[str, Waveform], path: PathLike, nperseg: int = 1024) -> Path:
    """Welch power spectral density of each named waveform (first channel), log scale"""
    fig, ax = plt.subplots(figsize=(6, 4))
    for name, w in waveforms.items():
        freqs, psd = power_spectral_density(w, nperseg=nperseg)
        ax.semilogy(freqs, psd[0], label=name)
    ax.set_xlabel("frequency [Hz]")
    ax.set_ylabel("power spectral density")
    ax.grid(True, alpha=0.3)
    ax.legend()
    return _save(fig, path)


def _save(fig, path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
