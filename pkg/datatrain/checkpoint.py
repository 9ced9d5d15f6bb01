"""
datatrain.checkpoint
~~~~~~~~~~~~~~~~~~~~

Checkpoint files. Layout:

    8 bytes   little-endian unsigned header length
    header    UTF-8 JSON, sorted keys, compact separators
    blob      every tensor of the state dict as little-endian float32, in
              header order

The header carries ``format_version``, the config snapshot, the epoch,
the metric history and the tensor table (name, shape, offset). Integer
buffers such as batch-norm counters are stored as float32 too; they are
small counts and convert back exactly.
"""

import json
import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Mapping, Union

import numpy as np
import torch

from cployo.errors import DataError

log = logging.getLogger(__name__)

FORMAT_VERSION = "1"
HEADER_LENGTH = struct.Struct("<Q")
BLOB_DTYPE = np.dtype("<f4")


class CheckpointVersionError(DataError):
    """Raised when a checkpoint declares a format version this reader does not know."""

    def __init__(self, found: Any) -> None:
        self.found = found
        super().__init__(f"checkpoint format_version {found!r} is not {FORMAT_VERSION!r}")


class CheckpointFormatError(DataError):
    """Raised when a checkpoint file is truncated or its header is unreadable."""

    pass


@dataclass
class Checkpoint:
    """A saved model.

    Attributes:
        config: snapshot of the configuration that built the model.
        state: name -> tensor, as from ``state_dict()``.
        epoch: epochs trained so far.
        history: one metrics record per epoch.
        fused: whether the RepViT branch sets were folded before saving.
    """

    config: Dict[str, Any]
    state: Dict[str, torch.Tensor]
    epoch: int = 0
    history: List[Dict[str, Any]] = field(default_factory=list)
    fused: bool = False
    format_version: str = FORMAT_VERSION

    def header(self) -> Dict[str, Any]:
        """JSON header: config, epoch, history and the offset table of the blob."""
        table = []
        offset = 0
        for name, tensor in self.state.items():
            count = int(tensor.numel())
            table.append({"name": name, "shape": list(tensor.shape), "offset": offset, "count": count})
            offset += count
        return {
            "format_version": self.format_version,
            "config": self.config,
            "epoch": self.epoch,
            "history": self.history,
            "fused": self.fused,
            "tensors": table,
        }

    def to_bytes(self) -> bytes:
        """Length prefix, header, then every tensor as float32 in state order."""
        header = json.dumps(self.header(), sort_keys=True, separators=(",", ":")).encode("utf-8")
        parts = [HEADER_LENGTH.pack(len(header)), header]
        for tensor in self.state.values():
            parts.append(tensor.detach().cpu().to(torch.float32).numpy().astype(BLOB_DTYPE).tobytes())
        return b"".join(parts)

    @classmethod
    def from_bytes(cls, data: bytes) -> "Checkpoint":
        """Parse :meth:`to_bytes` output.

        Raises:
            CheckpointFormatError: if the data is truncated or the header unreadable.
            CheckpointVersionError: for an unknown format version.
        """
        if len(data) < HEADER_LENGTH.size:
            raise CheckpointFormatError("checkpoint is shorter than its length prefix")
        (length,) = HEADER_LENGTH.unpack_from(data)
        start = HEADER_LENGTH.size
        try:
            header = json.loads(data[start:start + length].decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise CheckpointFormatError(f"unreadable checkpoint header: {exc}") from exc
        if header.get("format_version") != FORMAT_VERSION:
            raise CheckpointVersionError(header.get("format_version"))

        blob = np.frombuffer(data, dtype=BLOB_DTYPE, offset=start + length)
        state: Dict[str, torch.Tensor] = {}
        for entry in header["tensors"]:
            end = entry["offset"] + entry["count"]
            if end > blob.size:
                raise CheckpointFormatError(f"tensor {entry['name']} runs past the end of the blob")
            values = blob[entry["offset"]:end].astype(np.float32)
            state[entry["name"]] = torch.from_numpy(values.copy()).reshape(entry["shape"])
        return cls(
            config=header["config"],
            state=state,
            epoch=header["epoch"],
            history=header["history"],
            fused=header.get("fused", False),
        )


def save_checkpoint(ckpt: Checkpoint, path: Union[str, Path]) -> Path:
    """Write ``ckpt`` to ``path``, creating parent directories."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(ckpt.to_bytes())
    log.info("Wrote checkpoint %s (epoch %d, %d tensors)", path, ckpt.epoch, len(ckpt.state))
    return path


def load_checkpoint(path: Union[str, Path]) -> Checkpoint:
    """Read a checkpoint file.

    Raises:
        CheckpointFormatError: if the file is truncated or unreadable.
        CheckpointVersionError: for an unknown format version.
    """
    ckpt = Checkpoint.from_bytes(Path(path).read_bytes())
    log.info("Loaded checkpoint %s (epoch %d)", path, ckpt.epoch)
    return ckpt


def restore_state(model: torch.nn.Module, state: Mapping[str, torch.Tensor]) -> None:
    """Copy a checkpoint state into ``model``, casting to each target's dtype."""
    own = model.state_dict()
    missing = sorted(set(own) - set(state))
    unexpected = sorted(set(state) - set(own))
    if missing or unexpected:
        raise DataError(f"checkpoint does not fit the model: missing {missing}, unexpected {unexpected}")
    with torch.no_grad():
        for name, target in own.items():
            source = state[name]
            if tuple(source.shape) != tuple(target.shape):
                raise DataError(f"{name}: checkpoint shape {tuple(source.shape)} != model {tuple(target.shape)}")
            target.copy_(source.to(target.dtype))
