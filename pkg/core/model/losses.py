"""
Hinge adversarial losses and the discriminator feature-matching loss.

Every term is averaged over time (1/T_k), over scales (1/K) and over the
batch. The feature loss divides each layer's L1 distance by the layer's
element count, i.e. it is a mean absolute difference per layer.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Dict, Union

import torch
import torch.nn.functional as F

from core.errors import InvalidArgumentError, ShapeError
from core.model.discriminator import DiscriminatorOutput

DEFAULT_LAMBDA = 100.0

Scalar = Union[torch.Tensor, float]


def _check_scales(real: DiscriminatorOutput, fake: DiscriminatorOutput) -> None:
    if real.num_scales != fake.num_scales:
        raise ShapeError(f"real output has {real.num_scales} scales, fake has {fake.num_scales}")
    if real.num_scales == 0:
        raise ShapeError("discriminator output has no scales")


def discriminator_loss(real_out: DiscriminatorOutput, fake_out: DiscriminatorOutput) -> torch.Tensor:
    _check_scales(real_out, fake_out)
    real_term = sum(F.relu(1.0 - logits).mean() for logits in real_out.logits) / real_out.num_scales
    fake_term = sum(F.relu(1.0 + logits).mean() for logits in fake_out.logits) / fake_out.num_scales
    return real_term + fake_term


def generator_adversarial_loss(fake_out: DiscriminatorOutput) -> torch.Tensor:
    if fake_out.num_scales == 0:
        raise ShapeError("discriminator output has no scales")
    return sum(F.relu(1.0 - logits).mean() for logits in fake_out.logits) / fake_out.num_scales


def feature_matching_loss(real_out: DiscriminatorOutput, fake_out: DiscriminatorOutput) -> torch.Tensor:
    _check_scales(real_out, fake_out)
    total = 0.0
    for k, (real_layers, fake_layers) in enumerate(zip(real_out.features, fake_out.features)):
        if len(real_layers) != len(fake_layers) or not real_layers:
            raise ShapeError(f"scale {k}: {len(real_layers)} real vs {len(fake_layers)} fake feature layers")
        scale_total = 0.0
        for layer, (real, fake) in enumerate(zip(real_layers, fake_layers)):
            if real.shape != fake.shape:
                raise ShapeError(f"scale {k} layer {layer}: {tuple(real.shape)} vs {tuple(fake.shape)}")
            scale_total = scale_total + (real - fake).abs().mean()
        total = total + scale_total / len(real_layers)
    return total / real_out.num_scales


def generator_total_loss(adv: Scalar, rec: Scalar, lam: float = DEFAULT_LAMBDA) -> Scalar:
    if lam < 0:
        raise InvalidArgumentError(f"reconstruction weight must be >= 0, got {lam}")
    return adv + lam * rec


@dataclass
class LossReport:
    d_loss: float
    g_adv_loss: float
    g_rec_loss: float
    g_total: float
    lam: float = DEFAULT_LAMBDA

    @classmethod
    def from_components(cls, d_loss: float, g_adv: float, g_rec: float, lam: float) -> "LossReport":
        d_loss, g_adv, g_rec = float(d_loss), float(g_adv), float(g_rec)
        return cls(d_loss, g_adv, g_rec, generator_total_loss(g_adv, g_rec, lam), lam)

    def as_row(self, step: int) -> Dict[str, float]:
        return {
            "step": step,
            "d_loss": self.d_loss,
            "g_adv": self.g_adv_loss,
            "g_rec": self.g_rec_loss,
            "g_total": self.g_total,
        }

    def to_dict(self) -> Dict[str, float]:
        return asdict(self)
