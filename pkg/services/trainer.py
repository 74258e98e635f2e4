"""
Adversarial training loop.

Every batch drives one discriminator update (hinge loss on real vs generated
speech) followed by one generator update (hinge adversarial loss plus
lambda times the feature-matching loss) on the same batch. Both networks use
Adam with a constant learning rate. Checkpoints land in ``<run_dir>/ckpt``
and the per-step losses in ``<run_dir>/train_log.csv``; an interrupted run
resumes from its latest checkpoint and continues exactly as if it had never
stopped.
"""

from __future__ import annotations

import random
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np
import torch
from loguru import logger

from core.data.batching import TASKS, Batch, batch_iterator
from core.data.manifest import DatasetManifest
from core.data.mixing import DEFAULT_CROP_LENGTH, ExampleFactory, ExampleSettings
from core.errors import CheckpointError, ConfigurationError, MissingModalityError, NonFiniteLossError
from core.model.discriminator import MultiScaleDiscriminator
from core.model.generator import Generator
from core.model.losses import (
    DEFAULT_LAMBDA,
    LossReport,
    discriminator_loss,
    feature_matching_loss,
    generator_adversarial_loss,
    generator_total_loss,
)
from core.model.specs import DiscriminatorSpec, GeneratorSpec
from integrations.checkpoint_store import latest_checkpoint, load_state, save_checkpoint
from integrations.training_log import TrainingLog

LOG_FILE = "train_log.csv"


@dataclass
class TrainConfig:
    batch_size: int = 16
    learning_rate: float = 1e-4
    beta1: float = 0.5
    beta2: float = 0.9
    total_steps: int = 200_000
    lam: float = DEFAULT_LAMBDA
    seed: int = 0
    checkpoint_every: int = 10_000
    log_every: int = 100
    crop_length: int = DEFAULT_CROP_LENGTH
    num_workers: int = 0
    device: str = "cpu"
    task: str = "enhance"

    def __post_init__(self):
        if self.total_steps < 1:
            raise ConfigurationError(f"total_steps must be >= 1, got {self.total_steps}")
        if self.batch_size < 1:
            raise ConfigurationError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.checkpoint_every < 1 or self.log_every < 1:
            raise ConfigurationError("checkpoint_every and log_every must be >= 1")
        if self.learning_rate <= 0:
            raise ConfigurationError(f"learning rate must be positive, got {self.learning_rate}")
        if self.lam < 0:
            raise ConfigurationError(f"lambda must be >= 0, got {self.lam}")
        if self.task not in TASKS:
            raise ConfigurationError(f"unknown task {self.task!r}; choose from {TASKS}")

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in data.items() if k in known})


def resolve_device(device: str) -> torch.device:
    if device == "auto":
        return torch.device("cuda" if torch.cuda.is_available() else "cpu")
    return torch.device(device)


def seed_everything(seed: int) -> None:
    random.seed(seed)
    np.random.seed(seed % 2**32)
    torch.manual_seed(seed)
    torch.backends.cudnn.deterministic = True
    torch.backends.cudnn.benchmark = False


def capture_rng_state() -> Dict[str, Any]:
    state = {"python": random.getstate(), "numpy": np.random.get_state(), "torch": torch.get_rng_state()}
    if torch.cuda.is_available():
        state["cuda"] = torch.cuda.get_rng_state_all()
    return state


def restore_rng_state(state: Dict[str, Any]) -> None:
    random.setstate(state["python"])
    np.random.set_state(state["numpy"])
    torch.set_rng_state(state["torch"])
    if "cuda" in state and torch.cuda.is_available():
        torch.cuda.set_rng_state_all(state["cuda"])


@dataclass
class TrainState:
    """Networks, their Adam optimizers and the number of completed steps"""

    step: int
    generator: Generator
    discriminator: MultiScaleDiscriminator
    g_optimizer: torch.optim.Optimizer
    d_optimizer: torch.optim.Optimizer
    config: TrainConfig

    @classmethod
    def create(
        cls,
        config: TrainConfig,
        generator_spec: Optional[GeneratorSpec] = None,
        discriminator_spec: Optional[DiscriminatorSpec] = None,
    ) -> "TrainState":
        seed_everything(config.seed)
        device = resolve_device(config.device)
        generator = Generator(generator_spec).to(device)
        discriminator = MultiScaleDiscriminator(discriminator_spec).to(device)
        betas = (config.beta1, config.beta2)
        return cls(
            step=0,
            generator=generator,
            discriminator=discriminator,
            g_optimizer=torch.optim.Adam(generator.parameters(), lr=config.learning_rate, betas=betas),
            d_optimizer=torch.optim.Adam(discriminator.parameters(), lr=config.learning_rate, betas=betas),
            config=config,
        )

    @property
    def device(self) -> torch.device:
        return next(self.generator.parameters()).device

    @property
    def modules(self) -> Dict[str, torch.nn.Module]:
        return {"generator": self.generator, "discriminator": self.discriminator}

    @property
    def optimizers(self) -> Dict[str, torch.optim.Optimizer]:
        return {"generator": self.g_optimizer, "discriminator": self.d_optimizer}

    def snapshot(self, settings: Optional[ExampleSettings] = None) -> Dict[str, Any]:
        return {
            "train": self.config.to_dict(),
            "generator_spec": self.generator.spec.to_dict(),
            "discriminator_spec": self.discriminator.spec.to_dict(),
            "examples": (settings or ExampleSettings()).to_dict(),
        }

    def save(self, run_dir: Union[str, Path], settings: Optional[ExampleSettings] = None) -> Path:
        return save_checkpoint(
            run_dir, self.step, self.modules, self.optimizers, capture_rng_state(), self.snapshot(settings)
        )

    def load(self, checkpoint: Union[str, Path]) -> None:
        step, rng_state, snapshot = load_state(checkpoint, self.modules, self.optimizers, self.device)
        if GeneratorSpec.from_dict(snapshot["generator_spec"]) != self.generator.spec:
            raise CheckpointError(f"{checkpoint} was trained with a different generator spec")
        if DiscriminatorSpec.from_dict(snapshot["discriminator_spec"]) != self.discriminator.spec:
            raise CheckpointError(f"{checkpoint} was trained with a different discriminator spec")
        restore_rng_state(rng_state)
        self.step = step


def _max_activation(*tensors: torch.Tensor) -> float:
    values = [t.detach().abs().nan_to_num(nan=float("inf")).max().item() for t in tensors if t.numel()]
    return max(values) if values else float("nan")


def _check_finite(loss: torch.Tensor, step: int, component: str, *activations: torch.Tensor) -> None:
    if not torch.isfinite(loss):
        error = NonFiniteLossError(step, component, _max_activation(*activations))
        logger.error(str(error))
        raise error


def train_step(state: TrainState, batch: Batch) -> Tuple[TrainState, LossReport]:
    generator, discriminator = state.generator, state.discriminator
    batch = batch.to(state.device)
    x_a = generator.conditioning(batch.x_a)
    step = state.step + 1
    generator.train()
    discriminator.train()

    # discriminator update
    discriminator.requires_grad_(True)
    with torch.no_grad():
        fake = generator(batch.x_m, x_a)
    d_loss = discriminator_loss(discriminator(batch.y_m), discriminator(fake))
    _check_finite(d_loss, step, "discriminator loss", fake)
    state.d_optimizer.zero_grad(set_to_none=True)
    d_loss.backward()
    state.d_optimizer.step()

    # generator update; the discriminator only passes gradients through
    discriminator.requires_grad_(False)
    try:
        fake = generator(batch.x_m, x_a)
        with torch.no_grad():
            real_out = discriminator(batch.y_m)
        fake_out = discriminator(fake)
        g_adv = generator_adversarial_loss(fake_out)
        g_rec = feature_matching_loss(real_out, fake_out)
        g_total = generator_total_loss(g_adv, g_rec, state.config.lam)
        _check_finite(g_total, step, "generator loss", fake, *fake_out.logits)
        state.g_optimizer.zero_grad(set_to_none=True)
        g_total.backward()
        state.g_optimizer.step()
    finally:
        discriminator.requires_grad_(True)

    generator.trained_steps += 1
    state.step = step
    return state, LossReport.from_components(d_loss.item(), g_adv.item(), g_rec.item(), state.config.lam)


def fit(
    config: TrainConfig,
    manifest: DatasetManifest,
    generator_spec: Optional[GeneratorSpec] = None,
    discriminator_spec: Optional[DiscriminatorSpec] = None,
    run_dir: Union[str, Path] = "runs/default",
    factory: Optional[ExampleFactory] = None,
    resume: bool = True,
) -> Path:
    """Train for ``config.total_steps`` steps and return the last checkpoint"""
    run_dir = Path(run_dir)
    factory = factory or ExampleFactory(manifest)
    state = TrainState.create(config, generator_spec, discriminator_spec)
    log = TrainingLog(run_dir / LOG_FILE)

    latest = latest_checkpoint(run_dir) if resume else None
    if latest is not None:
        state.load(latest)
        log.truncate(state.step)
        logger.info(f"Resuming {run_dir} from step {state.step}")
    else:
        log.reset()
    if state.step >= config.total_steps:
        logger.info(f"{run_dir} already trained for {state.step} steps")
        return latest

    batches = batch_iterator(
        manifest,
        config.batch_size,
        config.crop_length,
        config.seed,
        factory=factory,
        task=config.task,
        num_workers=config.num_workers,
        start_batch=state.step,
    )
    rows: List[Dict[str, float]] = []
    last_checkpoint = latest
    for batch in batches:
        state, report = train_step(state, batch)
        rows.append(report.as_row(state.step))
        done = state.step >= config.total_steps
        if state.step % config.log_every == 0:
            logger.info(
                f"step {state.step}: d={report.d_loss:.4f} g_adv={report.g_adv_loss:.4f} "
                f"g_rec={report.g_rec_loss:.4f}"
            )
            log.append(rows)
            rows = []
        if state.step % config.checkpoint_every == 0 or done:
            log.append(rows)
            rows = []
            last_checkpoint = state.save(run_dir, factory.settings)
        if done:
            break
    return last_checkpoint


def train_accel_synth(
    config: TrainConfig,
    paired_manifest: DatasetManifest,
    generator_spec: Optional[GeneratorSpec] = None,
    discriminator_spec: Optional[DiscriminatorSpec] = None,
    run_dir: Union[str, Path] = "runs/accel_synth",
    settings: Optional[ExampleSettings] = None,
    resume: bool = True,
) -> Path:
    """Train the audio -> accelerometer generator on entries with recorded accelerometer data"""
    missing = [e.example_id for e in paired_manifest.entries if not e.has_accel]
    if missing:
        raise MissingModalityError(f"{len(missing)} entries lack an accelerometer recording, e.g. {missing[0]}")
    base = (generator_spec or GeneratorSpec()).to_dict()
    spec = GeneratorSpec.accel_synth(**{k: v for k, v in base.items() if k not in ("in_channels", "out_channels")})
    factory = ExampleFactory(paired_manifest, settings or ExampleSettings())
    return fit(replace(config, task="accel_synth"), paired_manifest, spec, discriminator_spec, run_dir, factory, resume)
