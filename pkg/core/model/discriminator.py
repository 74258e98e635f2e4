"""
Multi-scale waveform discriminator.

Three structurally identical networks judge the waveform at full, 1/2 and
1/4 resolution. Each is fully convolutional: an initial plain conv, four
grouped strided convs, then two plain convs, the last of which emits logits.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Tuple

import torch
from torch import nn

from core.errors import ShapeError
from core.model.specs import DiscriminatorSpec


@dataclass
class DiscriminatorOutput:
    """Per-scale logits (batch, 1, T_k) and per-scale internal feature maps"""

    logits: List[torch.Tensor]
    features: List[List[torch.Tensor]]

    @property
    def num_scales(self) -> int:
        return len(self.logits)

    def detach(self) -> "DiscriminatorOutput":
        return DiscriminatorOutput(
            [logit.detach() for logit in self.logits],
            [[f.detach() for f in scale] for scale in self.features],
        )


class ChannelLayerNorm(nn.Module):
    """LayerNorm over channels at every time step of a (batch, channels, time) map"""

    def __init__(self, channels: int):
        super().__init__()
        self.norm = nn.LayerNorm(channels)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.norm(x.transpose(1, 2)).transpose(1, 2)


def _layer(conv: nn.Conv1d, slope: float) -> nn.Sequential:
    return nn.Sequential(conv, ChannelLayerNorm(conv.out_channels), nn.LeakyReLU(slope))


class ScaleDiscriminator(nn.Module):
    def __init__(self, spec: DiscriminatorSpec):
        super().__init__()
        channels = spec.base_channels
        layers = [
            _layer(nn.Conv1d(1, channels, spec.initial_kernel, padding=spec.initial_kernel // 2), spec.leaky_slope)
        ]
        for width in spec.stage_channels():
            grouped = nn.Conv1d(
                channels,
                width,
                spec.grouped_kernel,
                stride=spec.downsample,
                padding=spec.grouped_kernel // 2,
                groups=spec.groups,
            )
            layers.append(_layer(grouped, spec.leaky_slope))
            channels = width
        first, last = spec.final_kernels
        layers.append(_layer(nn.Conv1d(channels, channels, first, padding=first // 2), spec.leaky_slope))
        self.layers = nn.ModuleList(layers)
        self.logits_layer = nn.Conv1d(channels, 1, last, padding=last // 2)

    def forward(self, x: torch.Tensor) -> Tuple[torch.Tensor, List[torch.Tensor]]:
        features = []
        for layer in self.layers:
            x = layer(x)
            features.append(x)
        return self.logits_layer(x), features


class MultiScaleDiscriminator(nn.Module):
    def __init__(self, spec: Optional[DiscriminatorSpec] = None):
        super().__init__()
        self.spec = spec or DiscriminatorSpec()
        self.scales = nn.ModuleList([ScaleDiscriminator(self.spec) for _ in range(self.spec.num_scales)])
        self.pool = nn.AvgPool1d(
            self.spec.pool_kernel,
            stride=self.spec.pool_stride,
            padding=(self.spec.pool_kernel - self.spec.pool_stride) // 2,
            count_include_pad=False,
        )

    def forward(self, y: torch.Tensor) -> DiscriminatorOutput:
        if y.dim() != 3 or y.shape[1] != 1:
            raise ShapeError(f"discriminator judges mono speech (batch, 1, time), got {tuple(y.shape)}")
        if y.shape[-1] < self.spec.min_input_length:
            raise ShapeError(f"input length {y.shape[-1]} is shorter than {self.spec.min_input_length} samples")
        logits, features = [], []
        for k, scale in enumerate(self.scales):
            if k > 0:
                y = self.pool(y)
            scale_logits, scale_features = scale(y)
            logits.append(scale_logits)
            features.append(scale_features)
        return DiscriminatorOutput(logits, features)
