"""
Binary checkpoint container.

Layout (little-endian):
    b"PSD1"
    u32 header length, UTF-8 JSON header {"format", "network", "config"}
    per tensor: u16 name length, name, u8 ndim, u32 dims..., float64 data
Every parameter is followed by its momentum buffer under ``<name>.momentum``.
"""
import json
import struct
from pathlib import Path
from typing import Any, Dict, Optional, Tuple, Union

import numpy as np
from loguru import logger
from pydantic import ValidationError

from ..errors import CheckpointError, MissingArtifactError
from .network import NetworkSpec, NetworkState, build_network

MAGIC = b"PSD1"
FORMAT_VERSION = 1
MOMENTUM_SUFFIX = ".momentum"


def _tensor_record(name: str, value: np.ndarray) -> bytes:
    encoded = name.encode("utf-8")
    data = np.ascontiguousarray(value, dtype="<f8")
    return b"".join(
        [
            struct.pack("<H", len(encoded)),
            encoded,
            struct.pack("<B", data.ndim),
            struct.pack(f"<{data.ndim}I", *data.shape),
            data.tobytes(),
        ]
    )


def save_checkpoint(
    state: NetworkState, path: Union[str, Path], config: Optional[Dict[str, Any]] = None
) -> None:
    """Write every parameter and momentum buffer; ``config`` is echoed in the header."""
    header = json.dumps(
        {
            "format": FORMAT_VERSION,
            "network": state.spec.model_dump(mode="json"),
            "config": config or {},
        },
        sort_keys=True,
    ).encode("utf-8")

    chunks = [MAGIC, struct.pack("<I", len(header)), header]
    for param in state.parameters():
        chunks.append(_tensor_record(param.name, param.value))
        chunks.append(_tensor_record(param.name + MOMENTUM_SUFFIX, param.momentum))

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(b"".join(chunks))
    logger.info(f"Saved checkpoint to {path} ({state.num_parameters} parameters)")


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.offset = 0

    def take(self, size: int) -> bytes:
        if self.offset + size > len(self.data):
            raise CheckpointError("Checkpoint is truncated")
        chunk = self.data[self.offset : self.offset + size]
        self.offset += size
        return chunk

    def unpack(self, fmt: str) -> Tuple:
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    @property
    def exhausted(self) -> bool:
        return self.offset >= len(self.data)


def read_checkpoint(path: Union[str, Path]) -> Tuple[Dict[str, Any], Dict[str, np.ndarray]]:
    """
    Parse a checkpoint file into its header and named tensors.

    Raises:
        MissingArtifactError: the file does not exist
        CheckpointError: bad magic, truncated data or a malformed header
    """
    path = Path(path)
    if not path.is_file():
        raise MissingArtifactError(f"Checkpoint not found: {path}")

    reader = _Reader(path.read_bytes())
    if reader.take(len(MAGIC)) != MAGIC:
        raise CheckpointError(f"{path} is not a checkpoint (bad magic)")
    (header_len,) = reader.unpack("<I")
    try:
        header = json.loads(reader.take(header_len).decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CheckpointError(f"Malformed checkpoint header: {e}") from e

    tensors: Dict[str, np.ndarray] = {}
    while not reader.exhausted:
        (name_len,) = reader.unpack("<H")
        name = reader.take(name_len).decode("utf-8")
        (ndim,) = reader.unpack("<B")
        shape = reader.unpack(f"<{ndim}I")
        count = int(np.prod(shape)) if ndim else 1
        tensors[name] = np.frombuffer(reader.take(8 * count), dtype="<f8").reshape(shape).copy()
    return header, tensors


def load_checkpoint(path: Union[str, Path]) -> Tuple[NetworkState, Dict[str, Any]]:
    """
    Rebuild the network described by a checkpoint and restore every tensor bitwise.

    Returns:
        (state, header)
    """
    header, tensors = read_checkpoint(path)
    try:
        spec = NetworkSpec(**header["network"])
    except (KeyError, TypeError, ValidationError) as e:
        raise CheckpointError(f"Checkpoint header has no valid network spec: {e}") from e

    state = build_network(spec, np.random.default_rng(0))
    expected = set()
    for param in state.parameters():
        records = ((param.name, param.value), (param.name + MOMENTUM_SUFFIX, param.momentum))
        for name, target in records:
            expected.add(name)
            if name not in tensors:
                raise CheckpointError(f"Checkpoint is missing tensor '{name}'")
            if tensors[name].shape != target.shape:
                raise CheckpointError(
                    f"Tensor '{name}' has shape {tensors[name].shape}, expected {target.shape}"
                )
            target[...] = tensors[name]

    unexpected = sorted(set(tensors) - expected)
    if unexpected:
        raise CheckpointError(f"Checkpoint has unexpected tensors: {', '.join(unexpected)}")
    logger.info(f"Loaded checkpoint {path}")
    return state, header
