import json

import numpy as np
import pytest
import torch

from raytrain import Checkpoint, ManifestInvalid, TrainConfig, predict, train
from raytrain import formats
from raytrain.config import NOISE_MODES


class TestConfig:
    def test_defaults(self):
        cfg = TrainConfig()
        assert cfg.learning_rate == 0.0002
        assert cfg.batch_size == 128
        assert cfg.noise == "gaussian"
        assert cfg.weights.mse_weight == 1.0
        assert cfg.weights.phy_weight == 0.1

    def test_validation(self):
        with pytest.raises(ValueError):
            TrainConfig(learning_rate=0.0)
        with pytest.raises(ValueError):
            TrainConfig(batch_size=0)
        with pytest.raises(ValueError):
            TrainConfig(noise="uniform")
        assert "gaussian" in NOISE_MODES

    def test_no_noise_zeroes_channels(self):
        assert TrainConfig(no_noise=True).effective_noise_channels == 0
        assert TrainConfig(noise="none").effective_noise_channels == 0
        assert TrainConfig().effective_noise_channels == 1

    def test_dict_roundtrip(self):
        cfg = TrainConfig(epochs=7, seed=3, no_physics=True)
        assert TrainConfig.from_dict(cfg.to_dict()) == cfg


class TestTrain:
    def test_loss_decreases_on_toy_set(self, small_dataset, tmp_path):
        log = tmp_path / "train.log"
        cfg = TrainConfig(batch_size=8, epochs=5, seed=0)
        ckpt = train(small_dataset / "manifest.json", cfg, log_path=log)
        assert len(ckpt.curves) == 5
        assert ckpt.curves[-1]["g_loss"] < ckpt.curves[0]["g_loss"]
        lines = log.read_text().strip().splitlines()
        assert len(lines) == 5
        assert lines[0].startswith("epoch=1 ")

    def test_initial_discriminator_loss_band(self, small_dataset):
        cfg = TrainConfig(batch_size=8, epochs=1, seed=1)
        ckpt = train(small_dataset / "manifest.json", cfg)
        assert 1.0 <= ckpt.curves[0]["d_loss"] <= 1.8

    def test_checkpoint_roundtrip_preserves_inference(self, small_dataset, tmp_path):
        cfg = TrainConfig(batch_size=8, epochs=2, seed=2)
        ckpt = train(small_dataset / "manifest.json", cfg)
        path = tmp_path / "model.ckpt"
        ckpt.save(path)
        loaded = Checkpoint.load(path)
        assert loaded.config == cfg
        assert loaded.curves == ckpt.curves
        manifest = formats.read_manifest(small_dataset / "manifest.json")
        raster = formats.read_raster(
            small_dataset / manifest["records"][0]["raster_path"]
        )
        a = predict(ckpt, raster, noise_seed=4)
        b = predict(loaded, raster, noise_seed=4)
        np.testing.assert_array_equal(a, b)

    def test_same_seed_same_checkpoint(self, small_dataset):
        cfg = TrainConfig(batch_size=8, epochs=2, seed=5)
        a = train(small_dataset / "manifest.json", cfg)
        b = train(small_dataset / "manifest.json", cfg)
        for key in a.generator_state:
            assert torch.equal(a.generator_state[key], b.generator_state[key])

    def test_no_noise_generator_shape(self, small_dataset):
        cfg = TrainConfig(batch_size=8, epochs=1, seed=0, no_noise=True)
        ckpt = train(small_dataset / "manifest.json", cfg)
        gen = ckpt.build_generator()
        first = next(gen.d1.parameters())
        assert first.shape[1] == 3  # raster only, no noise channel

    def test_empty_train_split_rejected(self, tmp_path):
        (tmp_path / "manifest.json").write_text(json.dumps({"records": []}))
        with pytest.raises(ManifestInvalid):
            train(tmp_path / "manifest.json", TrainConfig(epochs=1))
