"""
Conditional wave-to-wave UNet generator.

Encoder: input conv -> 4 blocks (3 dilated residual units, then a strided
conv that doubles the width) -> bottleneck conv. Decoder mirrors it with
transposed convs that halve the width. Each encoder block's residual output
is added to its mirrored decoder block. The out-most skip adds a 1x1
projection of the speech channel only, never the accelerometer.
"""

from __future__ import annotations

from typing import List, Optional, Tuple

import torch
from torch import nn
from torch.nn.utils.parametrizations import weight_norm

from core.errors import ShapeError
from core.model.specs import GeneratorSpec


def _wn(module: nn.Module, enabled: bool) -> nn.Module:
    return weight_norm(module) if enabled else module


class ResidualUnit(nn.Module):
    def __init__(self, channels: int, dilation: int, kernel_size: int = 3, use_weight_norm: bool = True):
        super().__init__()
        padding = dilation * (kernel_size - 1) // 2
        self.block = nn.Sequential(
            nn.ELU(),
            _wn(nn.Conv1d(channels, channels, kernel_size, dilation=dilation, padding=padding), use_weight_norm),
            nn.ELU(),
            _wn(nn.Conv1d(channels, channels, 1), use_weight_norm),
        )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return x + self.block(x)


class EncoderBlock(nn.Module):
    def __init__(self, channels: int, stride: int, spec: GeneratorSpec):
        super().__init__()
        self.residuals = nn.Sequential(
            *[ResidualUnit(channels, d, spec.residual_kernel_size, spec.weight_norm) for d in spec.dilations]
        )
        self.downsample = nn.Sequential(
            nn.ELU(),
            _wn(
                nn.Conv1d(channels, 2 * channels, 2 * stride, stride=stride, padding=stride // 2),
                spec.weight_norm,
            ),
        )

    def forward(self, x: torch.Tensor) -> Tuple[torch.Tensor, torch.Tensor]:
        skip = self.residuals(x)
        return self.downsample(skip), skip


class DecoderBlock(nn.Module):
    def __init__(self, channels: int, stride: int, spec: GeneratorSpec):
        super().__init__()
        out_channels = channels // 2
        self.upsample = nn.Sequential(
            nn.ELU(),
            _wn(
                nn.ConvTranspose1d(channels, out_channels, 2 * stride, stride=stride, padding=stride // 2),
                spec.weight_norm,
            ),
        )
        self.residuals = nn.Sequential(
            *[ResidualUnit(out_channels, d, spec.residual_kernel_size, spec.weight_norm) for d in spec.dilations]
        )

    def forward(self, x: torch.Tensor, skip: torch.Tensor) -> torch.Tensor:
        return self.residuals(self.upsample(x) + skip)


class Generator(nn.Module):
    def __init__(self, spec: Optional[GeneratorSpec] = None):
        super().__init__()
        self.spec = spec or GeneratorSpec()
        spec = self.spec
        channels = spec.base_channels
        padding = spec.kernel_size // 2

        self.input_layer = _wn(
            nn.Conv1d(spec.in_channels, channels, spec.kernel_size, padding=padding), spec.weight_norm
        )
        encoder = []
        for stride in spec.strides:
            encoder.append(EncoderBlock(channels, stride, spec))
            channels *= 2
        self.encoder = nn.ModuleList(encoder)
        self.bottleneck = nn.Sequential(
            nn.ELU(),
            _wn(
                nn.Conv1d(spec.bottleneck_channels, spec.bottleneck_channels, spec.kernel_size, padding=padding),
                spec.weight_norm,
            ),
        )
        decoder = []
        for stride in reversed(spec.strides):
            decoder.append(DecoderBlock(channels, stride, spec))
            channels //= 2
        self.decoder = nn.ModuleList(decoder)

        self.speech_skip = _wn(nn.Conv1d(1, spec.base_channels, 1), spec.weight_norm)
        self.output_layer = nn.Sequential(
            nn.ELU(),
            _wn(nn.Conv1d(spec.base_channels, spec.out_channels, spec.kernel_size, padding=padding), spec.weight_norm),
            nn.Tanh(),
        )
        # number of optimizer steps this generator has seen; persisted in checkpoints
        self.register_buffer("trained_steps", torch.zeros((), dtype=torch.long))

    def _check_inputs(self, x_m: torch.Tensor, x_a: Optional[torch.Tensor]) -> None:
        if x_m.dim() != 3 or x_m.shape[1] != 1:
            raise ShapeError(f"speech input must be (batch, 1, time), got {tuple(x_m.shape)}")
        length = x_m.shape[-1]
        if length == 0 or length % self.spec.total_stride:
            raise ShapeError(f"input length {length} is not a multiple of {self.spec.total_stride}")
        expected = self.spec.accel_channels
        got = 0 if x_a is None else x_a.shape[1]
        if got != expected:
            raise ShapeError(f"generator expects {expected} conditioning channel(s), got {got}")
        if x_a is not None and expected and (x_a.dim() != 3 or x_a.shape[0] != x_m.shape[0] or x_a.shape[-1] != length):
            raise ShapeError(f"conditioning shape {tuple(x_a.shape)} does not match speech {tuple(x_m.shape)}")

    def forward(self, x_m: torch.Tensor, x_a: Optional[torch.Tensor] = None) -> torch.Tensor:
        self._check_inputs(x_m, x_a)
        x = torch.cat([x_m, x_a], dim=1) if self.spec.accel_channels else x_m
        h = self.input_layer(x)
        skips: List[torch.Tensor] = []
        for block in self.encoder:
            h, skip = block(h)
            skips.append(skip)
        h = self.bottleneck(h)
        for block, skip in zip(self.decoder, reversed(skips)):
            h = block(h, skip)
        return self.output_layer(h + self.speech_skip(x_m))

    def conditioning(self, x_a: Optional[torch.Tensor]) -> Optional[torch.Tensor]:
        """The conditioning tensor this generator consumes from a batch (None when audio-only)"""
        return x_a if self.spec.accel_channels else None

    @property
    def is_trained(self) -> bool:
        return int(self.trained_steps) > 0
