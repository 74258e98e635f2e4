from __future__ import annotations

import torch

from core.dsp.waveform import Waveform, pad_to_multiple, trim
from core.errors import ShapeError, UntrainedModelError


@torch.no_grad()
def synthesize_accelerometer(clean: Waveform, synth_model) -> Waveform:
    """Predict the accelerometer waveform for clean speech with a trained audio->accel generator"""
    if synth_model is None or not getattr(synth_model, "is_trained", False):
        raise UntrainedModelError("accelerometer synthesis needs a trained 1-in/1-out generator")
    spec = synth_model.spec
    if spec.in_channels != 1 or spec.out_channels != 1:
        raise ShapeError(f"synthesis model must be 1-in/1-out, got {spec.in_channels}-in/{spec.out_channels}-out")
    padded, length = pad_to_multiple(clean, spec.total_stride)
    device = next(synth_model.parameters()).device
    was_training = synth_model.training
    synth_model.eval()
    try:
        source = torch.as_tensor(padded.mono(), dtype=torch.float32, device=device).view(1, 1, -1)
        predicted = synth_model(source).squeeze(0).cpu().double().numpy()
    finally:
        synth_model.train(was_training)
    return trim(padded.with_samples(predicted), length)
