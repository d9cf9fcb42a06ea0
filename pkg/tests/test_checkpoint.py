"""Tests for the binary checkpoint format."""
import json
import struct

import numpy as np
import pytest

from face_rfcn.errors import CheckpointError, MissingArtifactError
from face_rfcn.net import Trainer, load_checkpoint, save_checkpoint, train_step
from face_rfcn.net.checkpoint import MAGIC, read_checkpoint

GTS = np.array([[4.0, 4.0, 14.0, 15.0]])


@pytest.fixture
def trained_state(tiny_state, anchor_cfg, train_cfg):
    image = np.random.default_rng(8).uniform(size=(3, 32, 32))
    train_step(image, GTS, tiny_state, anchor_cfg, train_cfg, np.random.default_rng(0))
    return tiny_state


class TestCheckpoint:
    """Save and load."""

    def test_round_trip_is_bitwise(self, trained_state, tmp_path):
        path = tmp_path / "model.psd"
        save_checkpoint(trained_state, path)
        loaded, header = load_checkpoint(path)
        assert loaded.spec == trained_state.spec
        for original, restored in zip(trained_state.parameters(), loaded.parameters()):
            assert original.name == restored.name
            np.testing.assert_array_equal(original.value, restored.value)
            np.testing.assert_array_equal(original.momentum, restored.momentum)
        assert header["format"] == 1

    @pytest.mark.parametrize("steps", [5, pytest.param(100, marks=pytest.mark.slow)])
    def test_round_trip_after_training(self, tiny_state, anchor_cfg, train_cfg, tmp_path, steps):
        rng = np.random.default_rng(5)
        image = rng.uniform(size=(3, 32, 32))
        for step in range(steps):
            train_step(image, GTS, tiny_state, anchor_cfg, train_cfg, rng, step)
        save_checkpoint(tiny_state, tmp_path / "model.psd")
        loaded, _ = load_checkpoint(tmp_path / "model.psd")
        for original, restored in zip(tiny_state.parameters(), loaded.parameters()):
            assert original.value.tobytes() == restored.value.tobytes()
            assert original.momentum.tobytes() == restored.momentum.tobytes()

    def test_config_echo(self, tiny_state, tmp_path):
        path = tmp_path / "model.psd"
        save_checkpoint(tiny_state, path, {"train": {"seed": 3}})
        header, tensors = read_checkpoint(path)
        assert header["config"] == {"train": {"seed": 3}}
        assert header["network"]["num_anchors"] == 3
        assert "cls_pool.w" in tensors and "cls_pool.w.momentum" in tensors

    def test_header_is_json(self, tiny_state, tmp_path):
        path = tmp_path / "model.psd"
        save_checkpoint(tiny_state, path)
        data = path.read_bytes()
        assert data[:4] == MAGIC
        (length,) = struct.unpack("<I", data[4:8])
        assert json.loads(data[8 : 8 + length])["network"]["k"] == 3

    def test_missing_file(self, tmp_path):
        with pytest.raises(MissingArtifactError):
            load_checkpoint(tmp_path / "absent.psd")

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.psd"
        path.write_bytes(b"NOPE" + b"\x00" * 16)
        with pytest.raises(CheckpointError):
            load_checkpoint(path)

    def test_truncated(self, tiny_state, tmp_path):
        path = tmp_path / "model.psd"
        save_checkpoint(tiny_state, path)
        path.write_bytes(path.read_bytes()[:-5])
        with pytest.raises(CheckpointError):
            load_checkpoint(path)

    def test_malformed_header(self, tmp_path):
        path = tmp_path / "model.psd"
        path.write_bytes(MAGIC + struct.pack("<I", 3) + b"{{{")
        with pytest.raises(CheckpointError):
            load_checkpoint(path)

    def test_spec_without_tensors(self, tmp_path):
        header = json.dumps({"format": 1, "network": {}, "config": {}}).encode()
        path = tmp_path / "model.psd"
        path.write_bytes(MAGIC + struct.pack("<I", len(header)) + header)
        with pytest.raises(CheckpointError, match="missing tensor"):
            load_checkpoint(path)


@pytest.mark.slow
def test_same_seed_same_checkpoint_bytes(small_config, samples, tmp_path):
    config = small_config.model_copy(
        update={"train": small_config.train.model_copy(update={"iterations": 100})}
    )
    for name in ("one", "two"):
        save_checkpoint(Trainer(config).run(samples), tmp_path / f"{name}.psd")
    assert (tmp_path / "one.psd").read_bytes() == (tmp_path / "two.psd").read_bytes()
