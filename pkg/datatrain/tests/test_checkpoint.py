import json
import struct

import pytest
import torch

from cployo.errors import DataError
from datatrain.checkpoint import (Checkpoint, CheckpointFormatError,
                                  CheckpointVersionError, load_checkpoint,
                                  restore_state, save_checkpoint)
from datatrain.config import ModelConfig
from datatrain.model import CployoDetector

TINY = ModelConfig(width_mult=0.125)


def _checkpoint(seed=0):
    torch.manual_seed(seed)
    model = CployoDetector(TINY)
    state = {k: v.detach().clone() for k, v in model.state_dict().items()}
    return model, Checkpoint(config=TINY.model_dump(), state=state, epoch=3, history=[{"epoch": 0, "loss": 1.5}])


class TestCheckpoint:
    """Checkpoint serialisation."""

    def test_save_load_save_is_byte_identical(self, tmp_path):
        """Test that save, load and save again gives the same bytes."""
        _, ckpt = _checkpoint()
        first = save_checkpoint(ckpt, tmp_path / "a.ckpt").read_bytes()
        second = save_checkpoint(load_checkpoint(tmp_path / "a.ckpt"), tmp_path / "b.ckpt").read_bytes()
        assert first == second

    def test_header_layout(self):
        """Test the length-prefixed JSON header and the tensor payload size."""
        _, ckpt = _checkpoint()
        data = ckpt.to_bytes()
        (length,) = struct.unpack("<Q", data[:8])
        header = json.loads(data[8:8 + length].decode("utf-8"))
        assert header["format_version"] == "1"
        assert header["epoch"] == 3
        total = sum(entry["count"] for entry in header["tensors"])
        assert len(data) == 8 + length + 4 * total

    def test_restore_reproduces_forward(self, tmp_path):
        """Test that a restored model computes the same forward pass."""
        model, ckpt = _checkpoint(seed=1)
        model.eval()
        loaded = load_checkpoint(save_checkpoint(ckpt, tmp_path / "m.ckpt"))
        torch.manual_seed(99)
        other = CployoDetector(TINY).eval()
        restore_state(other, loaded.state)
        x = torch.rand(2, 1, 64, 64)
        with torch.no_grad():
            ours, theirs = model(x), other(x)
        for stride in ours:
            assert torch.equal(ours[stride], theirs[stride])

    def test_version_mismatch(self):
        """Test that an unknown format version is rejected."""
        _, ckpt = _checkpoint()
        ckpt.format_version = "0"
        with pytest.raises(CheckpointVersionError):
            Checkpoint.from_bytes(ckpt.to_bytes())

    def test_truncated(self):
        """Test that a truncated file is rejected."""
        _, ckpt = _checkpoint()
        with pytest.raises(CheckpointFormatError):
            Checkpoint.from_bytes(ckpt.to_bytes()[:-4])
        with pytest.raises(CheckpointFormatError):
            Checkpoint.from_bytes(b"\x01")

    def test_restore_rejects_other_architecture(self):
        """Test that restoring into a different architecture fails."""
        _, ckpt = _checkpoint()
        with pytest.raises(DataError):
            restore_state(CployoDetector(ModelConfig(width_mult=0.25)), ckpt.state)
