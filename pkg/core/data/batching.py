"""
Seeded, resumable batch streams.

Examples are addressed by a global counter k = batch * batch_size + slot.
Counter k belongs to epoch k // N, and each epoch visits the N manifest
entries in a permutation drawn from (seed, epoch). Because an example depends
only on (seed, k), a resumed run restarts the stream at any batch and sees
exactly the batches the uninterrupted run would have seen, whatever the
number of loader workers.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Dict, Iterator, List, Optional, Sequence, Union

import numpy as np
import torch
from torch.utils.data import DataLoader, Dataset, Sampler

from core.data.manifest import DatasetManifest
from core.data.mixing import DEFAULT_CROP_LENGTH, ExampleFactory, SynthesisPair, TrainingExample
from core.errors import ConfigurationError, InvalidArgumentError

TASKS = ("enhance", "accel_synth")


@dataclass
class Batch:
    """Stacked (batch, channels, time) float32 tensors"""

    x_m: torch.Tensor
    x_a: torch.Tensor
    y_m: torch.Tensor
    example_ids: List[str]

    @property
    def size(self) -> int:
        return self.x_m.shape[0]

    def to(self, device: Union[str, torch.device]) -> "Batch":
        return Batch(self.x_m.to(device), self.x_a.to(device), self.y_m.to(device), self.example_ids)


def _stack(arrays: Sequence[np.ndarray]) -> torch.Tensor:
    return torch.from_numpy(np.stack(arrays).astype(np.float32))


def collate_examples(examples: Sequence[Union[TrainingExample, SynthesisPair]]) -> Batch:
    if not examples:
        raise InvalidArgumentError("cannot collate an empty batch")
    if isinstance(examples[0], SynthesisPair):
        x_m = _stack([p.source.samples for p in examples])
        y_m = _stack([p.target.samples for p in examples])
        x_a = x_m.new_zeros((x_m.shape[0], 0, x_m.shape[-1]))
        return Batch(x_m, x_a, y_m, [p.example_id for p in examples])
    return Batch(
        x_m=_stack([e.x_m.samples for e in examples]),
        x_a=_stack([e.x_a.samples for e in examples]),
        y_m=_stack([e.y_m.samples for e in examples]),
        example_ids=[e.example_id for e in examples],
    )


class ExampleStream(Dataset):
    """Map-style view of the endless example stream; index = global example counter"""

    def __init__(self, factory: ExampleFactory, crop_length: int, seed: int, task: str = "enhance"):
        if task not in TASKS:
            raise InvalidArgumentError(f"unknown task {task!r}; choose from {TASKS}")
        self.factory = factory
        self.crop_length = crop_length
        self.seed = int(seed)
        self.task = task
        self._orders: Dict[int, np.ndarray] = {}

    def __len__(self) -> int:
        return len(self.factory.manifest.entries)

    def _order(self, epoch: int) -> np.ndarray:
        if epoch not in self._orders:
            self._orders = {epoch: np.random.default_rng([self.seed, epoch]).permutation(len(self))}
        return self._orders[epoch]

    def locate(self, index: int):
        """(entry position, example seed) for global counter ``index``"""
        epoch, position = divmod(int(index), len(self))
        entry_position = int(self._order(epoch)[position])
        if self.factory.settings.freeze_examples:
            key = [self.seed, entry_position]
        else:
            key = [self.seed, len(self), int(index)]
        example_seed = int(np.random.SeedSequence(key).generate_state(1)[0])
        return entry_position, example_seed

    def __getitem__(self, index: int):
        entry_position, example_seed = self.locate(index)
        entry = self.factory.manifest.entries[entry_position]
        if self.task == "accel_synth":
            return self.factory.make_synthesis_pair(entry, self.crop_length, example_seed)
        return self.factory.make_example(entry, None, self.crop_length, example_seed)


class StreamSampler(Sampler):
    """Endless counter starting at ``start``"""

    def __init__(self, start: int = 0):
        self.start = int(start)

    def __iter__(self) -> Iterator[int]:
        return itertools.count(self.start)


def batch_iterator(
    manifest: DatasetManifest,
    batch_size: int,
    crop_length: int = DEFAULT_CROP_LENGTH,
    seed: int = 0,
    *,
    factory: Optional[ExampleFactory] = None,
    task: str = "enhance",
    num_workers: int = 0,
    prefetch: int = 2,
    start_batch: int = 0,
) -> Iterator[Batch]:
    """Endless stream of batches in seeded order, optionally prefetched by worker processes"""
    if batch_size < 1:
        raise InvalidArgumentError(f"batch size must be >= 1, got {batch_size}")
    if not manifest.entries:
        raise ConfigurationError("cannot draw batches from an empty manifest")
    factory = factory or ExampleFactory(manifest)
    if factory.manifest is not manifest:
        factory = ExampleFactory(manifest, factory.settings, factory.accel_synth, factory.cache_size)
    loader = DataLoader(
        ExampleStream(factory, crop_length, seed, task),
        batch_size=batch_size,
        sampler=StreamSampler(start_batch * batch_size),
        collate_fn=collate_examples,
        num_workers=num_workers,
        prefetch_factor=prefetch if num_workers > 0 else None,
    )
    return iter(loader)
