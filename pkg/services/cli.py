#!/usr/bin/env python3
"""
Command-line entry points.

Usage:
  python seanet.py make-toy-corpus --out-dir data/toy
  python seanet.py make-folds --manifest data/all.jsonl --out-dir data/folds
  python seanet.py make-mixtures --manifest data/toy/manifest.jsonl --noise-list data/toy/noise.txt
  python seanet.py train --config config/smoke.json --manifest data/toy/manifest.jsonl
  python seanet.py train-accel-synth --manifest data/toy/manifest.jsonl --run-dir runs/synth
  python seanet.py denoise --checkpoint runs/default --input noisy.wav --accel accel.wav --output clean.wav
  python seanet.py evaluate --checkpoint runs/default --manifest test.jsonl --decimation-sweep --plot
  python seanet.py psd --input speech.wav --accel accel.wav --output psd.png

Every command writes its resolved configuration as run_config.json next to
its outputs. Failures print one line ``error:<category>: <message>`` to stderr.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import pandas as pd
from loguru import logger

from core.data.manifest import ManifestEntry, speaker_folds, write_manifest
from core.data.mixing import ExampleFactory
from core.data.toy_corpus import make_tone_corpus
from core.errors import ConfigurationError, SeanetError
from integrations.checkpoint_store import load_generator
from integrations.plots import plot_decimation_sweep, plot_psd
from integrations.wav_io import write_wav
from services.evaluator import (
    DECIMATION_FACTORS,
    GAIN_SWEEP_DB,
    EvalResult,
    aggregate_replicas,
    checkpoint_settings,
    decimation_sweep,
    enhance,
    evaluate_corpus,
    example_seed,
    gain_sweep,
    prepare_inputs,
)
from services.settings import RunConfig, configure_logging, load_environment, load_run_config
from services.trainer import fit, train_accel_synth

# flags mirroring RunConfig fields: name -> (type, help)
CONFIG_FLAGS: Dict[str, tuple] = {
    "manifest": (str, "JSON-lines manifest (clean_path, accel_path, speaker_id)"),
    "noise_list": (str, "text file with one noise recording per line"),
    "scenario": (str, "mixed_speech or mixed_noise"),
    "gain_db": (float, "interferer mixing gain in dB"),
    "decimation_factor": (int, "simulate an accelerometer sampled this many times slower"),
    "accel_channels": (str, "comma-separated accelerometer axes, e.g. 0 or 0,1"),
    "synth_checkpoint": (str, "audio->accel model used for entries without accelerometer data"),
    "cache_size": (int, "decoded recordings kept in memory per data-loading process"),
    "run_dir": (str, "training run directory (checkpoints, loss log)"),
    "out_dir": (str, "output directory"),
    "checkpoint": (str, "step-<N> checkpoint or run directory"),
    "seed": (int, "random seed"),
    "batch_size": (int, "examples per batch"),
    "learning_rate": (float, "Adam learning rate"),
    "steps": (int, "total training steps"),
    "lam": (float, "feature-matching loss weight"),
    "checkpoint_every": (int, "steps between checkpoints"),
    "log_every": (int, "steps between log lines"),
    "crop_length": (int, "training crop length in samples (multiple of 256)"),
    "num_workers": (int, "background data-loading workers"),
    "device": (str, "cpu, cuda or auto"),
    "base_channels": (int, "generator base width"),
    "disc_base_channels": (int, "discriminator base width"),
    "disc_max_channels": (int, "discriminator width cap"),
    "log_level": (str, "loguru level"),
}
BOOL_FLAGS = {
    "audio_only": "train/evaluate the speech-only model",
    "freeze_examples": "fixed dataset: crops and interferers depend only on the entry",
}


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON config file (see config/)")
    for name, (kind, help_text) in CONFIG_FLAGS.items():
        parser.add_argument(f"--{name.replace('_', '-')}", dest=name, type=kind, default=None, help=help_text)
    for name, help_text in BOOL_FLAGS.items():
        parser.add_argument(f"--{name.replace('_', '-')}", dest=name, action="store_const", const=True, help=help_text)
    parser.add_argument("--allow-missing-accel", dest="require_accel", action="store_const", const=False,
                        help="condition on silence when an entry has no accelerometer recording")
    parser.add_argument("--no-resume", dest="resume", action="store_const", const=False,
                        help="start training from scratch even if checkpoints exist")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="seanet", description="Accelerometer-conditioned speech enhancement")
    commands = parser.add_subparsers(dest="command", required=True)

    toy = commands.add_parser("make-toy-corpus", help="write a small synthetic corpus")
    toy.add_argument("--out-dir", required=True)
    toy.add_argument("--speakers", type=int, default=2)
    toy.add_argument("--utterances", type=int, default=4)
    toy.add_argument("--seconds", type=float, default=1.024)
    toy.add_argument("--seed", type=int, default=0)

    folds = commands.add_parser("make-folds", help="write speaker-disjoint train/test manifests")
    _add_config_flags(folds)
    folds.add_argument("--folds", type=int, default=5)

    for name, help_text in [
        ("make-mixtures", "write noisy/clean/accel WAV triples for inspection"),
        ("train", "train the enhancement model"),
        ("train-accel-synth", "train the audio->accelerometer model"),
    ]:
        _add_config_flags(commands.add_parser(name, help=help_text))

    denoise = commands.add_parser("denoise", help="enhance one recording")
    _add_config_flags(denoise)
    denoise.add_argument("--input", required=True, help="noisy microphone WAV")
    denoise.add_argument("--accel", help="accelerometer WAV recorded with the input")
    denoise.add_argument("--output", required=True, help="denoised WAV (16 kHz)")

    evaluate = commands.add_parser("evaluate", help="SI-SDRi of a checkpoint on a manifest")
    _add_config_flags(evaluate)
    evaluate.add_argument("--decimation-sweep", action="store_true", help="evaluate factors 1 and 16..100")
    evaluate.add_argument("--gain-sweep", action="store_true", help="evaluate mixing gains -10, 0 and +10 dB")
    evaluate.add_argument("--zero-accel", action="store_true", help="diagnostic: feed silence as accelerometer")
    evaluate.add_argument("--plot", action="store_true", help="write SI-SDRi vs accelerometer rate plot")
    evaluate.add_argument("--checkpoint-pattern", help="per-factor checkpoints, e.g. runs/d{factor}")

    psd = commands.add_parser("psd", help="plot microphone and accelerometer spectra")
    _add_config_flags(psd)
    psd.add_argument("--input", required=True)
    psd.add_argument("--accel", required=True)
    psd.add_argument("--output", required=True, help="image file")
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    overrides = {name: getattr(args, name, None) for name in [*CONFIG_FLAGS, *BOOL_FLAGS, "require_accel", "resume"]}
    config = load_run_config(getattr(args, "config", None), overrides)
    configure_logging(config.log_level)
    return config


def _factory(config: RunConfig) -> ExampleFactory:
    manifest = config.load_manifest()
    synth = load_generator(config.synth_checkpoint) if config.synth_checkpoint else None
    return ExampleFactory(manifest, config.example_settings(), synth, config.cache_size)


def cmd_make_toy_corpus(args: argparse.Namespace) -> Path:
    configure_logging()
    print(f"🎛️  Writing toy corpus to {args.out_dir}")
    corpus = make_tone_corpus(args.out_dir, args.speakers, args.utterances, args.seconds, seed=args.seed)
    print(f"✅ Manifest: {corpus.manifest_path}")
    print(f"✅ Noise list: {corpus.noise_list_path}")
    return corpus.root


def cmd_make_mixtures(config: RunConfig) -> Path:
    factory = _factory(config)
    out_dir = Path(config.out_dir)
    print(f"🎚️  Mixing {len(factory.manifest)} utterances ({factory.manifest.scenario.value})")
    derived: List[ManifestEntry] = []
    records = []
    for index, entry in enumerate(factory.manifest.entries):
        mixture = factory.build_mixture(entry, None, example_seed(config.seed, index))
        noisy = write_wav(out_dir / "noisy" / f"{entry.example_id}.wav", mixture.x_m)
        clean = write_wav(out_dir / "clean" / f"{entry.example_id}.wav", mixture.y_m)
        accel = None
        if config.example_settings().use_accel:
            accel = write_wav(out_dir / "accel" / f"{entry.example_id}.wav", mixture.x_a)
        derived.append(ManifestEntry(clean.relative_to(out_dir), entry.speaker_id,
                                     accel.relative_to(out_dir) if accel else None))
        records.append({"example_id": entry.example_id, "noisy_path": str(noisy.relative_to(out_dir)),
                        "interferer": mixture.interferer_id, "gain": mixture.gain})
    write_manifest(derived, out_dir / "manifest.jsonl")
    _write_mixture_table(records, out_dir / "mixtures.csv")
    config.write_snapshot(out_dir)
    print(f"✅ Wrote {len(derived)} mixtures to {out_dir}")
    return out_dir


def cmd_make_folds(config: RunConfig, n_folds: int) -> List[Path]:
    manifest = config.load_manifest(check_scenario=False)
    out_dir = Path(config.out_dir)
    written: List[Path] = []
    for index, (train, test) in enumerate(speaker_folds(manifest, n_folds)):
        fold_dir = out_dir / f"fold-{index}"
        written.append(write_manifest(train.entries, fold_dir / "train.jsonl"))
        written.append(write_manifest(test.entries, fold_dir / "test.jsonl"))
        print(f"🗂️  fold-{index}: {len(train.speakers)} train / {len(test.speakers)} test speakers")
    config.write_snapshot(out_dir)
    print(f"✅ Wrote {n_folds} folds to {out_dir}")
    return written


def _write_mixture_table(records: List[Dict[str, Any]], path: Path) -> None:
    pd.DataFrame(records, columns=["example_id", "noisy_path", "interferer", "gain"]).to_csv(path, index=False)


def cmd_train(config: RunConfig) -> Path:
    factory = _factory(config)
    config.write_snapshot(config.run_dir)
    print(f"🚀 Training for {config.steps} steps in {config.run_dir}")
    checkpoint = fit(
        config.train_config(),
        factory.manifest,
        config.generator_spec(),
        config.discriminator_spec(),
        config.run_dir,
        factory,
        resume=config.resume,
    )
    print(f"✅ Final checkpoint: {checkpoint}")
    return checkpoint


def cmd_synth_accel_train(config: RunConfig) -> Path:
    manifest = config.load_manifest(check_scenario=False)
    config.write_snapshot(config.run_dir)
    print(f"🚀 Training audio->accelerometer model for {config.steps} steps in {config.run_dir}")
    checkpoint = train_accel_synth(
        config.train_config(),
        manifest,
        config.generator_spec(),
        config.discriminator_spec(),
        config.run_dir,
        config.example_settings(),
        resume=config.resume,
    )
    print(f"✅ Final checkpoint: {checkpoint}")
    return checkpoint


def _require_checkpoint(config: RunConfig) -> str:
    if not config.checkpoint:
        raise ConfigurationError("no checkpoint given (--checkpoint or SEANET_CHECKPOINT)")
    return config.checkpoint


def cmd_denoise(config: RunConfig, in_audio: str, in_accel: Optional[str], out_path: str) -> Path:
    checkpoint = _require_checkpoint(config)
    generator = load_generator(checkpoint, device=config.device)
    settings = checkpoint_settings(checkpoint)
    if config.decimation_factor != 1:
        settings = replace(settings, decimation_factor=config.decimation_factor)
    conditioned = generator.spec.accel_channels > 0
    if conditioned and not in_accel:
        raise ConfigurationError("this model is conditioned on the accelerometer; pass --accel")
    speech, accel = prepare_inputs(in_audio, in_accel if conditioned else None, settings)
    estimate = enhance(generator, speech, accel)
    out_path = write_wav(out_path, estimate)
    config.write_snapshot(out_path.parent)
    print(f"✅ Denoised {in_audio} -> {out_path}")
    return out_path


def _sweep_checkpoints(config: RunConfig, pattern: Optional[str], factors: Sequence[int]):
    if pattern:
        if "{factor}" not in pattern:
            raise ConfigurationError("--checkpoint-pattern must contain {factor}")
        return {factor: pattern.format(factor=factor) for factor in factors}
    return _require_checkpoint(config)


def cmd_evaluate(
    config: RunConfig,
    decimation: bool = False,
    gains: bool = False,
    zero_accel: bool = False,
    plot: bool = False,
    pattern: Optional[str] = None,
) -> List[Path]:
    manifest = config.load_manifest()
    kwargs = {"seed": config.seed, "device": config.device, "zero_accel": zero_accel}
    if config.synth_checkpoint:
        kwargs["accel_synth"] = load_generator(config.synth_checkpoint, device=config.device)
    if decimation:
        factors = (1,) + DECIMATION_FACTORS
        print(f"📉 Decimation sweep over factors {list(factors)}")
        results: List[EvalResult] = decimation_sweep(_sweep_checkpoints(config, pattern, factors), manifest,
                                                     factors, **kwargs)
    elif gains:
        print(f"📉 Gain sweep over {list(GAIN_SWEEP_DB)} dB")
        results = gain_sweep(_require_checkpoint(config), manifest, GAIN_SWEEP_DB, config.decimation_factor,
                             **kwargs)
    else:
        checkpoint = pattern.format(factor=config.decimation_factor) if pattern else _require_checkpoint(config)
        results = [evaluate_corpus(checkpoint, manifest, config.decimation_factor, **kwargs)]

    out_dir = Path(config.out_dir)
    written: List[Path] = []
    for result in results:
        written.extend(result.write(out_dir))
        print(f"📊 {result.stem}: SI-SDRi {result.mean_si_sdri:.2f} ± {result.std_si_sdri:.2f} dB")
    summary = out_dir / "summary.csv"
    aggregate_replicas(results).to_csv(summary, index=False)
    written.append(summary)
    if plot:
        written.append(plot_decimation_sweep(results, out_dir / "decimation_sweep.png"))
    config.write_snapshot(out_dir)
    print(f"✅ Results written to {out_dir}")
    return written


def cmd_psd(config: RunConfig, in_audio: str, in_accel: str, out_path: str) -> Path:
    speech, accel = prepare_inputs(in_audio, in_accel, config.example_settings())
    path = plot_psd({"microphone": speech, "accelerometer": accel}, out_path)
    config.write_snapshot(path.parent)
    print(f"✅ Spectra plotted to {path}")
    return path


def run(args: argparse.Namespace) -> Any:
    if args.command == "make-toy-corpus":
        return cmd_make_toy_corpus(args)
    config = resolve_config(args)
    if args.command == "make-folds":
        return cmd_make_folds(config, args.folds)
    if args.command == "make-mixtures":
        return cmd_make_mixtures(config)
    if args.command == "train":
        return cmd_train(config)
    if args.command == "train-accel-synth":
        return cmd_synth_accel_train(config)
    if args.command == "denoise":
        return cmd_denoise(config, args.input, args.accel, args.output)
    if args.command == "evaluate":
        return cmd_evaluate(config, args.decimation_sweep, args.gain_sweep, args.zero_accel, args.plot,
                            args.checkpoint_pattern)
    if args.command == "psd":
        return cmd_psd(config, args.input, args.accel, args.output)
    raise ConfigurationError(f"unknown command {args.command}")


def main(argv: Optional[Sequence[str]] = None) -> int:
    load_environment()
    args = build_parser().parse_args(argv)
    try:
        run(args)
    except SeanetError as e:
        logger.error(str(e))
        print(f"error:{e.category}: {e}", file=sys.stderr)
        return 2
    except Exception as e:  # noqa: BLE001
        logger.exception("unexpected failure")
        print(f"error:internal: {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
