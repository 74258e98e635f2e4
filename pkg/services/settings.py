"""
Run configuration shared by every command.

Values are resolved in order: dataclass defaults < JSON config file <
``SEANET_*`` environment variables (a ``.env`` file is honored) < command-line
flags. The resolved configuration is written as ``run_config.json`` next to
each command's outputs.
"""

from __future__ import annotations

import json
import os
import sys
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Tuple, Union, get_type_hints

from dotenv import load_dotenv
from loguru import logger

from core.data.manifest import DatasetManifest, load_manifest
from core.data.mixing import DEFAULT_CACHE_SIZE, ExampleSettings
from core.errors import ConfigurationError
from core.model.specs import DiscriminatorSpec, GeneratorSpec
from services.trainer import TrainConfig

ENV_PREFIX = "SEANET_"
SNAPSHOT_NAME = "run_config.json"


def _bool_env(value: str) -> bool:
    return value.strip() not in ("0", "false", "False", "no", "")


@dataclass
class RunConfig:
    # data
    manifest: Optional[str] = None
    noise_list: Optional[str] = None
    scenario: str = "mixed_noise"
    gain_db: float = 0.0
    decimation_factor: int = 1
    accel_channels: Tuple[int, ...] = (0,)
    audio_only: bool = False
    require_accel: bool = True
    freeze_examples: bool = False
    synth_checkpoint: Optional[str] = None
    cache_size: int = DEFAULT_CACHE_SIZE
    # outputs
    run_dir: str = "runs/default"
    out_dir: str = "outputs"
    checkpoint: Optional[str] = None
    # training
    seed: int = 0
    batch_size: int = 16
    learning_rate: float = 1e-4
    beta1: float = 0.5
    beta2: float = 0.9
    steps: int = 200_000
    lam: float = 100.0
    checkpoint_every: int = 10_000
    log_every: int = 100
    crop_length: int = 16384
    num_workers: int = 0
    device: str = "cpu"
    resume: bool = True
    # model
    base_channels: int = 32
    disc_base_channels: int = 16
    disc_max_channels: int = 1024
    log_level: str = "INFO"

    def __post_init__(self):
        self.accel_channels = tuple(int(c) for c in self.accel_channels)

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["accel_channels"] = list(self.accel_channels)
        return data

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            batch_size=self.batch_size,
            learning_rate=self.learning_rate,
            beta1=self.beta1,
            beta2=self.beta2,
            total_steps=self.steps,
            lam=self.lam,
            seed=self.seed,
            checkpoint_every=self.checkpoint_every,
            log_every=self.log_every,
            crop_length=self.crop_length,
            num_workers=self.num_workers,
            device=self.device,
        )

    def generator_spec(self) -> GeneratorSpec:
        if self.audio_only:
            return GeneratorSpec.audio_only(base_channels=self.base_channels)
        return GeneratorSpec(in_channels=1 + len(self.accel_channels), base_channels=self.base_channels)

    def discriminator_spec(self) -> DiscriminatorSpec:
        return DiscriminatorSpec(base_channels=self.disc_base_channels, max_channels=self.disc_max_channels)

    def example_settings(self) -> ExampleSettings:
        return ExampleSettings(
            accel_channels=self.accel_channels,
            decimation_factor=self.decimation_factor,
            use_accel=not self.audio_only,
            require_accel=self.require_accel,
            freeze_examples=self.freeze_examples,
        )

    def load_manifest(self, check_scenario: bool = True) -> DatasetManifest:
        """Load and validate the manifest so missing recordings fail before any work starts"""
        if not self.manifest:
            raise ConfigurationError("no manifest given (--manifest or SEANET_MANIFEST)")
        manifest = load_manifest(self.manifest, self.noise_list, self.scenario, self.gain_db)
        manifest.validate(check_scenario)
        return manifest

    def write_snapshot(self, out_dir: Union[str, Path]) -> Path:
        path = Path(out_dir) / SNAPSHOT_NAME
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.to_dict(), indent=2), encoding="utf-8")
        return path


def _coerce(name: str, value: Any) -> Any:
    hint = get_type_hints(RunConfig)[name]
    if value is None:
        return None
    if hint in (Tuple[int, ...],):
        if isinstance(value, str):
            value = [v for v in value.replace(" ", "").split(",") if v]
        return tuple(int(v) for v in value)
    if hint is bool:
        return _bool_env(value) if isinstance(value, str) else bool(value)
    if hint is int:
        return int(value)
    if hint is float:
        return float(value)
    return str(value)


def load_run_config(
    config_file: Optional[Union[str, Path]] = None,
    overrides: Optional[Mapping[str, Any]] = None,
    environ: Optional[Mapping[str, str]] = None,
) -> RunConfig:
    """Resolve a RunConfig from defaults, a JSON file, the environment and explicit overrides"""
    environ = os.environ if environ is None else environ
    names = {f.name for f in fields(RunConfig)}
    data: Dict[str, Any] = {}

    config_file = config_file or environ.get(f"{ENV_PREFIX}CONFIG")
    if config_file:
        path = Path(config_file)
        try:
            file_values = json.loads(path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigurationError(f"cannot read config file {path}: {e}") from e
        unknown = sorted(set(file_values) - names)
        if unknown:
            raise ConfigurationError(f"{path}: unknown settings {unknown}")
        data.update(file_values)

    for name in names:
        raw = environ.get(f"{ENV_PREFIX}{name.upper()}")
        if raw is not None:
            data[name] = raw

    for name, value in (overrides or {}).items():
        if name not in names:
            raise ConfigurationError(f"unknown setting {name!r}")
        if value is not None:
            data[name] = value

    try:
        return RunConfig(**{name: _coerce(name, value) for name, value in data.items()})
    except (TypeError, ValueError) as e:
        raise ConfigurationError(f"invalid configuration: {e}") from e


def load_environment() -> None:
    load_dotenv()


def configure_logging(level: Optional[str] = None) -> None:
    """Replace loguru's default sink with one stderr sink at SEANET_LOG_LEVEL (default INFO)"""
    level = (level or os.getenv(f"{ENV_PREFIX}LOG_LEVEL", "INFO")).upper()
    logger.remove()
    logger.add(sys.stderr, level=level, format="{time:HH:mm:ss} | {level: <7} | {message}")
