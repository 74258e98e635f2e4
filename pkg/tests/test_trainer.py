#!/usr/bin/env python3
"""
Tests for the adversarial training loop, checkpointing and resume
"""

import shutil

import pandas as pd
import pytest
import torch

from core.data.batching import Batch, batch_iterator
from core.data.manifest import DatasetManifest, ManifestEntry
from core.errors import ConfigurationError, MissingModalityError, NonFiniteLossError
from core.model.specs import DiscriminatorSpec, GeneratorSpec
from integrations.checkpoint_store import list_checkpoints, load_generator, read_snapshot, step_dir
from integrations.training_log import TrainingLog
from services.trainer import LOG_FILE, TrainConfig, TrainState, fit, train_accel_synth, train_step

GEN = GeneratorSpec(base_channels=4)
DISC = DiscriminatorSpec(base_channels=4, max_channels=32)


def _config(**changes):
    base = dict(batch_size=2, total_steps=10, checkpoint_every=5, log_every=3, crop_length=1024, seed=11)
    return TrainConfig(**{**base, **changes})


def _log(run_dir):
    return TrainingLog(run_dir / LOG_FILE).read()


@pytest.fixture(scope="module")
def manifest(toy_corpus):
    return toy_corpus.load()


@pytest.fixture(scope="module")
def reference_run(manifest, tmp_path_factory):
    run_dir = tmp_path_factory.mktemp("reference")
    last = fit(_config(), manifest, GEN, DISC, run_dir)
    return run_dir, last


class TestConfig:
    def test_defaults(self):
        config = TrainConfig()
        assert (config.batch_size, config.learning_rate, config.beta1, config.beta2) == (16, 1e-4, 0.5, 0.9)
        assert config.lam == 100.0
        assert config.crop_length == 16384

    @pytest.mark.parametrize(
        "changes",
        [{"total_steps": 0}, {"batch_size": 0}, {"learning_rate": 0.0}, {"lam": -1.0}, {"task": "x"}],
    )
    def test_invalid(self, changes):
        with pytest.raises(ConfigurationError):
            TrainConfig(**changes)

    def test_from_dict_ignores_unknown_keys(self):
        assert TrainConfig.from_dict({"batch_size": 4, "extra": 1}).batch_size == 4


class TestTrainStep:
    def _batch(self, manifest):
        return next(batch_iterator(manifest, 2, 1024, seed=0))

    def test_every_generator_parameter_gets_a_gradient(self, manifest):
        state = TrainState.create(_config(), GEN, DISC)
        state, report = train_step(state, self._batch(manifest))
        assert state.step == 1
        assert int(state.generator.trained_steps) == 1
        for name, param in state.generator.named_parameters():
            assert param.grad is not None and param.grad.abs().sum() > 0, name
        for value in (report.d_loss, report.g_adv_loss, report.g_rec_loss):
            assert value >= 0
        assert report.g_total == pytest.approx(report.g_adv_loss + 100.0 * report.g_rec_loss)

    def test_zero_lambda_leaves_only_adversarial_term(self, manifest):
        state = TrainState.create(_config(lam=0.0), GEN, DISC)
        _, report = train_step(state, self._batch(manifest))
        assert report.g_total == report.g_adv_loss

    def test_non_finite_loss_stops_training(self, manifest):
        state = TrainState.create(_config(), GEN, DISC)
        batch = self._batch(manifest)
        poisoned = Batch(batch.x_m, batch.x_a, torch.full_like(batch.y_m, float("nan")), batch.example_ids)
        with pytest.raises(NonFiniteLossError) as info:
            train_step(state, poisoned)
        assert info.value.step == 1
        assert state.step == 0

    def test_generator_failure_leaves_discriminator_trainable(self, manifest, monkeypatch):
        monkeypatch.setattr("services.trainer.generator_total_loss", lambda adv, rec, lam: adv * float("nan"))
        state = TrainState.create(_config(), GEN, DISC)
        with pytest.raises(NonFiniteLossError) as info:
            train_step(state, self._batch(manifest))
        assert info.value.component == "generator loss"
        assert all(param.requires_grad for param in state.discriminator.parameters())
        assert int(state.generator.trained_steps) == 0


class TestFit:
    def test_checkpoints_and_log(self, reference_run):
        run_dir, last = reference_run
        assert last == step_dir(run_dir, 10)
        assert [s for s, _ in list_checkpoints(run_dir)] == [5, 10]
        log = _log(run_dir)
        assert log["step"].tolist() == list(range(1, 11))
        assert int(load_generator(last).trained_steps) == 10
        assert read_snapshot(last)["train"]["total_steps"] == 10

    def test_same_seed_same_log(self, reference_run, manifest, tmp_path):
        fit(_config(), manifest, GEN, DISC, tmp_path)
        pd.testing.assert_frame_equal(_log(tmp_path), _log(reference_run[0]))

    def test_resume_continues_like_uninterrupted_run(self, reference_run, manifest, tmp_path):
        fit(_config(total_steps=5), manifest, GEN, DISC, tmp_path)
        assert [s for s, _ in list_checkpoints(tmp_path)] == [5]
        fit(_config(), manifest, GEN, DISC, tmp_path)
        pd.testing.assert_frame_equal(_log(tmp_path), _log(reference_run[0]))

    def test_resume_after_losing_last_checkpoint(self, reference_run, manifest, tmp_path):
        run_dir = tmp_path / "copy"
        shutil.copytree(reference_run[0], run_dir)
        shutil.rmtree(step_dir(run_dir, 10))
        fit(_config(), manifest, GEN, DISC, run_dir)
        pd.testing.assert_frame_equal(_log(run_dir), _log(reference_run[0]))

    def test_finished_run_is_not_retrained(self, reference_run, manifest):
        run_dir, last = reference_run
        assert fit(_config(), manifest, GEN, DISC, run_dir) == last
        assert len(_log(run_dir)) == 10

    def test_no_resume_starts_over(self, reference_run, manifest, tmp_path):
        run_dir = tmp_path / "copy"
        shutil.copytree(reference_run[0], run_dir)
        fit(_config(total_steps=3, checkpoint_every=3), manifest, GEN, DISC, run_dir, resume=False)
        assert _log(run_dir)["step"].tolist() == [1, 2, 3]


class TestAccelSynth:
    def test_requires_recorded_accelerometer(self, manifest, tmp_path):
        entries = [ManifestEntry(e.clean_path, e.speaker_id) for e in manifest.entries]
        with pytest.raises(MissingModalityError):
            train_accel_synth(_config(), DatasetManifest(entries, manifest.noise_sources), GEN, DISC, tmp_path)

    def test_trains_single_channel_model(self, manifest, tmp_path):
        last = train_accel_synth(_config(total_steps=2, checkpoint_every=2), manifest, GEN, DISC, tmp_path)
        model = load_generator(last)
        assert (model.spec.in_channels, model.spec.out_channels) == (1, 1)
        assert model.spec.base_channels == 4
        assert model.is_trained
        assert read_snapshot(last)["train"]["task"] == "accel_synth"


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
