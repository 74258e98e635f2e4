"""
On-disk checkpoints.

Layout under a run directory::

    ckpt/step-<N>/generator.pt
                  discriminator.pt
                  optimizers.pt
                  rng.pt
                  config.json

Each step directory is written under a temporary name and renamed into place,
so a crash never leaves a half-written ``step-<N>``.
"""

from __future__ import annotations

import json
import re
import shutil
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import torch
from loguru import logger

from core.errors import CheckpointError
from core.model.generator import Generator
from core.model.specs import GeneratorSpec

PathLike = Union[str, Path]

CKPT_DIR = "ckpt"
SNAPSHOT = "config.json"
_STEP_RE = re.compile(r"^step-(\d+)$")


def step_dir(run_dir: PathLike, step: int) -> Path:
    return Path(run_dir) / CKPT_DIR / f"step-{step}"


def list_checkpoints(run_dir: PathLike) -> List[Tuple[int, Path]]:
    root = Path(run_dir) / CKPT_DIR
    if not root.is_dir():
        return []
    found = []
    for child in root.iterdir():
        match = _STEP_RE.match(child.name)
        if match and (child / SNAPSHOT).is_file():
            found.append((int(match.group(1)), child))
    return sorted(found)


def latest_checkpoint(run_dir: PathLike) -> Optional[Path]:
    checkpoints = list_checkpoints(run_dir)
    return checkpoints[-1][1] if checkpoints else None


def resolve_checkpoint(path: PathLike) -> Path:
    """Accept either a ``step-<N>`` directory or a run directory (its latest checkpoint)"""
    path = Path(path)
    if (path / SNAPSHOT).is_file():
        return path
    latest = latest_checkpoint(path)
    if latest is None:
        raise CheckpointError(f"no checkpoint found at {path}")
    return latest


def save_checkpoint(
    run_dir: PathLike,
    step: int,
    modules: Dict[str, torch.nn.Module],
    optimizers: Dict[str, torch.optim.Optimizer],
    rng_state: Dict[str, Any],
    snapshot: Dict[str, Any],
) -> Path:
    """Atomically write ``ckpt/step-<step>`` and return its path"""
    final = step_dir(run_dir, step)
    tmp = final.with_name(f".tmp-{final.name}")
    if tmp.exists():
        shutil.rmtree(tmp)
    tmp.mkdir(parents=True)
    for name, module in modules.items():
        torch.save(module.state_dict(), tmp / f"{name}.pt")
    torch.save({name: opt.state_dict() for name, opt in optimizers.items()}, tmp / "optimizers.pt")
    torch.save(rng_state, tmp / "rng.pt")
    (tmp / SNAPSHOT).write_text(json.dumps({"step": step, **snapshot}, indent=2), encoding="utf-8")
    if final.exists():
        shutil.rmtree(final)
    tmp.rename(final)
    logger.info(f"Checkpoint written: {final}")
    return final


def read_snapshot(checkpoint: PathLike) -> Dict[str, Any]:
    path = resolve_checkpoint(checkpoint) / SNAPSHOT
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise CheckpointError(f"cannot read {path}: {e}") from e


def _load_tensor_file(path: Path, device: Union[str, torch.device], weights_only: bool = True) -> Any:
    if not path.is_file():
        raise CheckpointError(f"checkpoint file missing: {path}")
    return torch.load(path, map_location=device, weights_only=weights_only)


def _restore(module: torch.nn.Module, path: Path, device) -> None:
    try:
        module.load_state_dict(_load_tensor_file(path, device))
    except RuntimeError as e:
        raise CheckpointError(f"{path} does not match the model: {e}") from e


def load_generator(
    checkpoint: PathLike,
    spec: Optional[GeneratorSpec] = None,
    device: Union[str, torch.device] = "cpu",
) -> Generator:
    """Rebuild the generator stored in ``checkpoint``; ``spec`` (if given) must match the stored one"""
    path = resolve_checkpoint(checkpoint)
    snapshot = read_snapshot(path)
    if "generator_spec" not in snapshot:
        raise CheckpointError(f"{path} has no generator spec in its snapshot")
    stored = GeneratorSpec.from_dict(snapshot["generator_spec"])
    if spec is not None and spec != stored:
        raise CheckpointError(f"{path} holds a generator with spec {stored}, expected {spec}")
    generator = Generator(stored).to(device)
    _restore(generator, path / "generator.pt", device)
    generator.eval()
    return generator


def load_state(
    checkpoint: PathLike,
    modules: Dict[str, torch.nn.Module],
    optimizers: Dict[str, torch.optim.Optimizer],
    device: Union[str, torch.device] = "cpu",
) -> Tuple[int, Dict[str, Any], Dict[str, Any]]:
    """Load weights and optimizer moments in place; returns (step, rng state, snapshot)"""
    path = resolve_checkpoint(checkpoint)
    snapshot = read_snapshot(path)
    for name, module in modules.items():
        _restore(module, path / f"{name}.pt", device)
    states = _load_tensor_file(path / "optimizers.pt", device, weights_only=False)
    for name, optimizer in optimizers.items():
        if name not in states:
            raise CheckpointError(f"{path} has no optimizer state for {name}")
        optimizer.load_state_dict(states[name])
    rng_state = _load_tensor_file(path / "rng.pt", "cpu", weights_only=False)
    return int(snapshot["step"]), rng_state, snapshot
