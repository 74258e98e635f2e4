#!/usr/bin/env python3
"""
Tests for the conditional UNet generator and its spec
"""

import json

import pytest
import torch
from torch import nn

from core.errors import ConfigurationError, ShapeError
from core.model.generator import Generator
from core.model.specs import GeneratorSpec, count_parameters


def _expected_parameters(spec: GeneratorSpec) -> int:
    """Closed-form count for weight-normed convs (gain per output channel, per input channel when transposed)"""
    c, k, r = spec.base_channels, spec.kernel_size, spec.residual_kernel_size
    units = len(spec.dilations)

    def residual(ch):
        return ch * ch * r + 2 * ch + ch * ch + 2 * ch

    total = spec.in_channels * c * k + 2 * c
    for s in spec.strides:
        total += units * residual(c) + c * 2 * c * 2 * s + 2 * (2 * c)
        c *= 2
    total += c * c * k + 2 * c
    for s in reversed(spec.strides):
        total += c * (c // 2) * 2 * s + c // 2 + c + units * residual(c // 2)
        c //= 2
    total += 3 * spec.base_channels
    total += spec.base_channels * spec.out_channels * k + 2 * spec.out_channels
    return total


@pytest.fixture
def generator(tiny_generator_spec):
    torch.manual_seed(0)
    return Generator(tiny_generator_spec)


def _inputs(length, batch=2, accel_channels=1):
    torch.manual_seed(1)
    return torch.randn(batch, 1, length), torch.randn(batch, accel_channels, length)


class TestShapes:
    @pytest.mark.parametrize("length", [256, 2560, 16384])
    def test_output_matches_input_length(self, generator, length):
        x_m, x_a = _inputs(length)
        with torch.no_grad():
            y = generator(x_m, x_a)
        assert y.shape == (2, 1, length)
        assert y.abs().max() <= 1.0

    def test_length_must_be_stride_multiple(self, generator):
        x_m, x_a = _inputs(250)
        with pytest.raises(ShapeError):
            generator(x_m, x_a)

    def test_conditioning_channels_checked(self, generator):
        x_m, x_a = _inputs(256, accel_channels=2)
        with pytest.raises(ShapeError):
            generator(x_m, x_a)
        with pytest.raises(ShapeError):
            generator(x_m, None)

    def test_audio_only_takes_no_conditioning(self):
        model = Generator(GeneratorSpec.audio_only(base_channels=4))
        x_m, _ = _inputs(512)
        assert model(x_m).shape == (2, 1, 512)
        assert model.conditioning(torch.zeros(2, 1, 512)) is None

    def test_bottleneck_length(self, generator):
        seen = {}
        generator.bottleneck.register_forward_hook(lambda module, args, out: seen.setdefault("shape", out.shape))
        with torch.no_grad():
            generator(*_inputs(1024))
        assert seen["shape"] == (2, 4 * 2 ** 4, 4)
        assert generator.spec.bottleneck_channels == 64


class TestShiftCovariance:
    def test_shifting_input_by_total_stride_shifts_output(self, generator):
        # the margin exceeds the receptive field, so the interior sees no padding
        length, shift, margin = 65536, 256, 16384
        torch.manual_seed(2)
        x_m, x_a = torch.randn(1, 1, length + shift), torch.randn(1, 1, length + shift)
        with torch.no_grad():
            early = generator(x_m[..., :length], x_a[..., :length])
            late = generator(x_m[..., shift:], x_a[..., shift:])
        interior = slice(margin, length - margin - shift)
        shifted = slice(margin + shift, length - margin)
        assert torch.allclose(early[..., shifted], late[..., interior], atol=1e-4)


class TestConditioning:
    def test_output_depends_on_accelerometer(self, generator):
        x_m, x_a = _inputs(512)
        x_a.requires_grad_(True)
        generator(x_m, x_a).sum().backward()
        assert x_a.grad.abs().sum() > 0

    def test_outermost_skip_carries_speech_only(self, generator):
        with torch.no_grad():
            for part in (generator.input_layer, generator.encoder, generator.bottleneck, generator.decoder):
                for module in part.modules():
                    if isinstance(module, (nn.Conv1d, nn.ConvTranspose1d)):
                        module.parametrizations.weight.original0.zero_()
                        module.bias.zero_()
            x_m, x_a = _inputs(512)
            y = generator(x_m, x_a)
            assert torch.allclose(y, generator.output_layer(generator.speech_skip(x_m)))
            assert torch.allclose(y, generator(x_m, torch.randn_like(x_a)))

    def test_untrained_until_steps_recorded(self, generator):
        assert not generator.is_trained
        generator.trained_steps += 1
        assert generator.is_trained
        assert "trained_steps" in generator.state_dict()


class TestSpec:
    def test_default_parameter_count(self):
        assert count_parameters(GeneratorSpec()) == 9265506

    @pytest.mark.parametrize(
        "spec",
        [
            GeneratorSpec(base_channels=4),
            GeneratorSpec.audio_only(base_channels=8),
            GeneratorSpec(in_channels=4, base_channels=6),
            GeneratorSpec.accel_synth(base_channels=4),
        ],
    )
    def test_parameter_count_formula(self, spec):
        assert count_parameters(spec) == _expected_parameters(spec)

    def test_parameter_count_grows_with_width(self):
        counts = [count_parameters(GeneratorSpec(base_channels=c)) for c in (2, 4, 8)]
        assert counts == sorted(counts)
        assert len(set(counts)) == 3

    def test_variants(self):
        assert GeneratorSpec.audio_only().in_channels == 1
        assert GeneratorSpec.audio_only().accel_channels == 0
        synth = GeneratorSpec.accel_synth(base_channels=8)
        assert (synth.in_channels, synth.out_channels, synth.base_channels) == (1, 1, 8)

    @pytest.mark.parametrize(
        "changes",
        [{"strides": (2, 2, 8, 4)}, {"strides": (4, 4, 16, 1)}, {"base_channels": 0}, {"in_channels": 0}],
    )
    def test_invalid_specs(self, changes):
        with pytest.raises(ConfigurationError):
            GeneratorSpec(**changes)

    def test_json_round_trip(self):
        spec = GeneratorSpec(base_channels=12, in_channels=3)
        assert GeneratorSpec.from_dict(json.loads(json.dumps(spec.to_dict()))) == spec


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
