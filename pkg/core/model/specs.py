"""
Declarative hyperparameters for the generator and the discriminators.

Specs are plain dataclasses so they can be written next to checkpoints as
JSON and rebuilt without any training code.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from math import prod
from typing import Any, Dict, Tuple

from core.errors import ConfigurationError

TOTAL_STRIDE = 256


@dataclass(frozen=True)
class GeneratorSpec:
    in_channels: int = 2
    out_channels: int = 1
    base_channels: int = 32
    strides: Tuple[int, ...] = (2, 2, 8, 8)
    dilations: Tuple[int, ...] = (1, 3, 9)
    kernel_size: int = 7
    residual_kernel_size: int = 3
    activation: str = "elu"
    weight_norm: bool = True

    def __post_init__(self):
        object.__setattr__(self, "strides", tuple(int(s) for s in self.strides))
        object.__setattr__(self, "dilations", tuple(int(d) for d in self.dilations))
        self.validate()

    def validate(self) -> None:
        if self.in_channels < 1 or self.out_channels < 1:
            raise ConfigurationError("generator needs at least one input and one output channel")
        if self.base_channels < 1:
            raise ConfigurationError(f"base_channels must be positive, got {self.base_channels}")
        if prod(self.strides) != TOTAL_STRIDE:
            raise ConfigurationError(
                f"strides {self.strides} multiply to {prod(self.strides)}, expected {TOTAL_STRIDE}"
            )
        if any(s % 2 for s in self.strides):
            raise ConfigurationError(f"strides must be even for exact same-padding, got {self.strides}")
        if self.activation != "elu":
            raise ConfigurationError(f"unsupported generator activation {self.activation!r}")

    @property
    def accel_channels(self) -> int:
        """Conditioning channels appended after the speech channel"""
        return self.in_channels - 1

    @property
    def total_stride(self) -> int:
        return prod(self.strides)

    @property
    def bottleneck_channels(self) -> int:
        return self.base_channels * 2 ** len(self.strides)

    @classmethod
    def audio_only(cls, **overrides) -> "GeneratorSpec":
        return cls(**{**overrides, "in_channels": 1, "out_channels": 1})

    @classmethod
    def accel_synth(cls, **overrides) -> "GeneratorSpec":
        """Audio in, accelerometer out; otherwise identical to the enhancement model"""
        return cls(**{**overrides, "in_channels": 1, "out_channels": 1})

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["strides"] = list(self.strides)
        data["dilations"] = list(self.dilations)
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "GeneratorSpec":
        return cls(**data)


@dataclass(frozen=True)
class DiscriminatorSpec:
    num_scales: int = 3
    scale_factors: Tuple[int, ...] = (1, 2, 4)
    base_channels: int = 16
    stages: int = 4
    downsample: int = 4
    channel_multiplier: int = 4
    max_channels: int = 1024
    groups: int = 4
    initial_kernel: int = 15
    grouped_kernel: int = 41
    final_kernels: Tuple[int, int] = (5, 3)
    leaky_slope: float = 0.3
    pool_kernel: int = 4
    pool_stride: int = 2

    def __post_init__(self):
        object.__setattr__(self, "scale_factors", tuple(int(s) for s in self.scale_factors))
        object.__setattr__(self, "final_kernels", tuple(int(k) for k in self.final_kernels))
        self.validate()

    def validate(self) -> None:
        if len(self.scale_factors) != self.num_scales:
            raise ConfigurationError(f"{self.num_scales} scales but scale factors {self.scale_factors}")
        expected = tuple(self.pool_stride ** k for k in range(self.num_scales))
        if self.scale_factors != expected:
            raise ConfigurationError(f"scale factors {self.scale_factors} do not match pooling {expected}")
        for channels in [self.base_channels, *self.stage_channels()]:
            if channels % self.groups:
                raise ConfigurationError(f"{channels} channels cannot be split into {self.groups} groups")
        if len(self.final_kernels) != 2:
            raise ConfigurationError("exactly two final convolutions are expected")

    def stage_channels(self):
        """Output width of each grouped stage, starting from base_channels"""
        channels, widths = self.base_channels, []
        for _ in range(self.stages):
            channels = min(channels * self.channel_multiplier, self.max_channels)
            widths.append(channels)
        return widths

    @property
    def stage_stride(self) -> int:
        return self.downsample ** self.stages

    @property
    def min_input_length(self) -> int:
        return self.stage_stride

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["scale_factors"] = list(self.scale_factors)
        data["final_kernels"] = list(self.final_kernels)
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "DiscriminatorSpec":
        return cls(**data)


def count_parameters(spec) -> int:
    """Trainable parameter count of the network a spec describes"""
    from core.model.discriminator import MultiScaleDiscriminator
    from core.model.generator import Generator

    if isinstance(spec, GeneratorSpec):
        module = Generator(spec)
    elif isinstance(spec, DiscriminatorSpec):
        module = MultiScaleDiscriminator(spec)
    else:
        raise ConfigurationError(f"cannot count parameters of {type(spec).__name__}")
    return sum(p.numel() for p in module.parameters() if p.requires_grad)
