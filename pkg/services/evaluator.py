"""
Corpus evaluation: SI-SDR improvement of a trained generator over its noisy
inputs, plus the accelerometer-bandwidth and mixing-gain sweeps.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
import torch
from loguru import logger

from core.data.manifest import DatasetManifest, ManifestEntry
from core.data.mixing import ExampleFactory, ExampleSettings
from core.dsp.filters import band_limit
from core.dsp.waveform import Waveform, pad_to_multiple, trim
from core.errors import CheckpointError, ConfigurationError, ShapeError, UndefinedMetricError
from core.metrics.si_sdr import is_silent, mean_std, si_sdr
from core.model.generator import Generator
from integrations.checkpoint_store import load_generator, read_snapshot

PathLike = Union[str, Path]

DECIMATION_FACTORS = (16, 20, 32, 40, 50, 64, 80, 100)
SWEEP_FACTORS = (1,) + DECIMATION_FACTORS
GAIN_SWEEP_DB = (-10.0, 0.0, 10.0)
CSV_COLUMNS = ["example_id", "si_sdr_in", "si_sdr_out", "si_sdri", "excluded"]


@dataclass
class ExampleScore:
    example_id: str
    si_sdr_in: float
    si_sdr_out: float
    si_sdri: float
    excluded: bool = False


@dataclass
class EvalResult:
    scenario: str
    decimation_factor: int
    per_example: List[ExampleScore] = field(default_factory=list)
    gain_db: float = 0.0
    checkpoint: str = ""
    zero_accel: bool = False

    @property
    def included(self) -> List[ExampleScore]:
        return [s for s in self.per_example if not s.excluded]

    @property
    def mean_si_sdri(self) -> float:
        return mean_std([s.si_sdri for s in self.included])[0]

    @property
    def std_si_sdri(self) -> float:
        return mean_std([s.si_sdri for s in self.included])[1]

    @property
    def stem(self) -> str:
        suffix = "-zero-accel" if self.zero_accel else ""
        return f"eval-{self.scenario}-d{self.decimation_factor}-g{self.gain_db:+g}{suffix}"

    def to_dict(self) -> Dict[str, Any]:
        return {
            "scenario": self.scenario,
            "decimation_factor": self.decimation_factor,
            "gain_db": self.gain_db,
            "checkpoint": self.checkpoint,
            "zero_accel": self.zero_accel,
            "mean_si_sdri": self.mean_si_sdri,
            "std_si_sdri": self.std_si_sdri,
            "n_examples": len(self.included),
            "n_excluded": len(self.per_example) - len(self.included),
            "per_example": [asdict(s) for s in self.per_example],
        }

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([asdict(s) for s in self.per_example], columns=CSV_COLUMNS)

    def write(self, out_dir: PathLike) -> Tuple[Path, Path]:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        json_path = out_dir / f"{self.stem}.json"
        csv_path = out_dir / f"{self.stem}.csv"
        json_path.write_text(json.dumps(self.to_dict(), indent=2), encoding="utf-8")
        self.to_frame().to_csv(csv_path, index=False)
        return json_path, csv_path


@torch.no_grad()
def enhance(generator: Generator, x_m: Waveform, x_a: Optional[Waveform] = None) -> Waveform:
    """Denoise a whole utterance: pad to the total stride, run the generator, trim back"""
    padded_m, length = pad_to_multiple(x_m, generator.spec.total_stride)
    device = next(generator.parameters()).device
    speech = torch.as_tensor(padded_m.mono(), dtype=torch.float32, device=device).view(1, 1, -1)
    conditioning = None
    if generator.spec.accel_channels:
        if x_a is None:
            raise ShapeError("this generator is conditioned on the accelerometer but none was given")
        if x_a.length != x_m.length:
            raise ShapeError(f"accelerometer has {x_a.length} samples, speech has {x_m.length}")
        padded_a, _ = pad_to_multiple(x_a, generator.spec.total_stride)
        conditioning = torch.as_tensor(padded_a.samples, dtype=torch.float32, device=device).unsqueeze(0)
    was_training = generator.training
    generator.eval()
    try:
        estimate = generator(speech, conditioning)
    finally:
        generator.train(was_training)
    return trim(padded_m.with_samples(estimate[0].cpu().double().numpy()), length)


def checkpoint_settings(checkpoint: PathLike) -> ExampleSettings:
    """Example settings a checkpoint was trained with (defaults when the snapshot has none)"""
    stored = read_snapshot(checkpoint).get("examples")
    return ExampleSettings.from_dict(stored) if stored else ExampleSettings()


def _eval_settings(generator: Generator, settings: ExampleSettings, factor: int) -> ExampleSettings:
    conditioned = generator.spec.accel_channels > 0
    if conditioned and generator.spec.accel_channels != len(settings.accel_channels):
        raise CheckpointError(
            f"generator expects {generator.spec.accel_channels} accelerometer channel(s), "
            f"settings select {len(settings.accel_channels)}"
        )
    return replace(settings, decimation_factor=int(factor), use_accel=conditioned)


def example_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence([seed, index]).generate_state(1)[0])


def score_example(estimate: Waveform, noisy: Waveform, clean: Waveform, example_id: str) -> ExampleScore:
    if is_silent(clean):
        logger.warning(f"{example_id}: silent reference, excluded from aggregation")
        return ExampleScore(example_id, float("nan"), float("nan"), float("nan"), excluded=True)
    try:
        sdr_in, sdr_out = si_sdr(noisy, clean), si_sdr(estimate, clean)
    except UndefinedMetricError as e:
        logger.warning(f"{example_id}: {e}, excluded from aggregation")
        return ExampleScore(example_id, float("nan"), float("nan"), float("nan"), excluded=True)
    return ExampleScore(example_id, sdr_in, sdr_out, sdr_out - sdr_in)


def evaluate_corpus(
    generator_ckpt: Union[PathLike, Generator],
    manifest: DatasetManifest,
    decimation_factor: int = 1,
    *,
    settings: Optional[ExampleSettings] = None,
    seed: int = 0,
    device: str = "cpu",
    zero_accel: bool = False,
    accel_synth: Optional[Generator] = None,
) -> EvalResult:
    """Score every manifest entry as a full utterance at the given accelerometer bandwidth.

    Entries without a recorded accelerometer track use ``accel_synth`` when given.
    """
    if not manifest.entries:
        raise ConfigurationError("cannot evaluate an empty manifest")
    if isinstance(generator_ckpt, Generator):
        generator, checkpoint = generator_ckpt, ""
        settings = settings or ExampleSettings()
    else:
        generator, checkpoint = load_generator(generator_ckpt, device=device), str(generator_ckpt)
        settings = settings or checkpoint_settings(generator_ckpt)
    factory = ExampleFactory(manifest, _eval_settings(generator, settings, decimation_factor), accel_synth)

    scores = []
    for index, entry in enumerate(manifest.entries):
        mixture = factory.build_mixture(entry, None, example_seed(seed, index))
        x_a = mixture.x_a.with_samples(np.zeros_like(mixture.x_a.samples)) if zero_accel else mixture.x_a
        estimate = enhance(generator, mixture.x_m, x_a)
        scores.append(score_example(estimate, mixture.x_m, mixture.y_m, entry.example_id))

    result = EvalResult(
        scenario=manifest.scenario.value,
        decimation_factor=int(decimation_factor),
        per_example=scores,
        gain_db=manifest.mix_gain_db,
        checkpoint=checkpoint,
        zero_accel=zero_accel,
    )
    logger.info(
        f"Evaluated {len(result.included)} examples ({manifest.scenario.value}, factor {decimation_factor}): "
        f"SI-SDRi {result.mean_si_sdri:.2f} +- {result.std_si_sdri:.2f} dB"
    )
    return result


def decimation_sweep(
    checkpoints: Union[PathLike, Mapping[int, PathLike]],
    manifest: DatasetManifest,
    factors: Sequence[int] = SWEEP_FACTORS,
    **kwargs,
) -> List[EvalResult]:
    """One result per factor; ``checkpoints`` is one model for all factors or one per factor"""
    results = []
    for factor in factors:
        if isinstance(checkpoints, Mapping):
            if factor not in checkpoints:
                raise ConfigurationError(f"no checkpoint given for decimation factor {factor}")
            checkpoint = checkpoints[factor]
        else:
            checkpoint = checkpoints
        results.append(evaluate_corpus(checkpoint, manifest, factor, **kwargs))
    return results


def gain_sweep(
    checkpoint: PathLike,
    manifest: DatasetManifest,
    gains_db: Sequence[float] = GAIN_SWEEP_DB,
    decimation_factor: int = 1,
    **kwargs,
) -> List[EvalResult]:
    return [
        evaluate_corpus(checkpoint, replace(manifest, mix_gain_db=float(gain)), decimation_factor, **kwargs)
        for gain in gains_db
    ]


def aggregate_replicas(results: Sequence[EvalResult]) -> pd.DataFrame:
    """Mean and std of the per-run mean SI-SDRi, grouped by (scenario, factor, gain)"""
    columns = ["scenario", "decimation_factor", "gain_db", "replicas", "mean_si_sdri", "std_si_sdri"]
    if not results:
        return pd.DataFrame(columns=columns)
    runs = pd.DataFrame(
        [
            {
                "scenario": r.scenario,
                "decimation_factor": r.decimation_factor,
                "gain_db": r.gain_db,
                "si_sdri": r.mean_si_sdri,
            }
            for r in results
        ]
    )
    grouped = runs.groupby(["scenario", "decimation_factor", "gain_db"], sort=True)["si_sdri"]
    table = grouped.agg(replicas="count", mean_si_sdri="mean", std_si_sdri=lambda s: float(np.std(s)))
    return table.reset_index()[columns]


def prepare_inputs(
    audio_path: PathLike,
    accel_path: Optional[PathLike],
    settings: ExampleSettings,
) -> Tuple[Waveform, Optional[Waveform]]:
    """Load a recording pair with the training preprocessing (filter, normalize, resample accel)"""
    factory = ExampleFactory(DatasetManifest([]), settings)
    speech = factory.load_audio(Path(audio_path))
    if accel_path is None:
        return speech, None
    entry = ManifestEntry(Path(audio_path), "input", Path(accel_path))
    accel = factory.load_accel(entry, speech)
    if settings.decimation_factor > 1:
        accel = band_limit(accel, settings.decimation_factor)
    return speech, accel
