"""Checkpoint file: ``b"SPFC"``, version byte, u32 header length, JSON header, payload.

The header holds the model config, a tensor directory
(name, shape, byte offset, byte length) and optional optimizer/run metadata.
The payload is every tensor as contiguous little-endian float32.
"""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .._io import atomic_write_bytes
from ..errors import CorruptHeaderError, NumericFailureError, ShapeMismatchError, TruncatedPayloadError
from ..nn.optim import OptimizerState
from .config import ModelConfig
from .network import DualChannelNet

MAGIC = b"SPFC"
VERSION = 1
VELOCITY_PREFIX = "velocity:"


@dataclass
class Checkpoint:
    config: ModelConfig
    tensors: dict[str, np.ndarray]
    optimizer: dict | None = None
    velocities: dict[str, np.ndarray] = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    def build_model(self) -> DualChannelNet:
        model = DualChannelNet(self.config, init=False)
        model.load_state(self.tensors)
        return model

    def optimizer_state(self) -> OptimizerState | None:
        if self.optimizer is None:
            return None
        state = OptimizerState(**self.optimizer)
        state.velocities = {k: v.copy() for k, v in self.velocities.items()}
        return state


def encode_checkpoint(model: DualChannelNet, optimizer: OptimizerState | None = None,
                      extra: dict | None = None) -> bytes:
    tensors = dict(model.state())
    if optimizer is not None:
        for name in model.params():
            if name in optimizer.velocities:
                tensors[VELOCITY_PREFIX + name] = optimizer.velocities[name]
    directory, chunks, offset = [], [], 0
    for name, arr in tensors.items():
        if not np.all(np.isfinite(arr)):
            raise NumericFailureError(f"refusing to save non-finite tensor {name!r}")
        raw = np.ascontiguousarray(arr, dtype="<f4").tobytes()
        directory.append({"name": name, "shape": list(arr.shape), "offset": offset, "length": len(raw)})
        chunks.append(raw)
        offset += len(raw)
    header = {
        "config": model.config.to_dict(),
        "tensors": directory,
        "optimizer": optimizer.hyper() if optimizer is not None else None,
        "extra": extra or {},
    }
    head = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return b"".join([MAGIC, struct.pack("<B", VERSION), struct.pack("<I", len(head)), head] + chunks)


def save_checkpoint(model: DualChannelNet, path, optimizer: OptimizerState | None = None,
                    extra: dict | None = None) -> None:
    atomic_write_bytes(path, encode_checkpoint(model, optimizer, extra))


def expected_shapes(config: ModelConfig) -> dict[str, tuple[int, ...]]:
    model = DualChannelNet(config, init=False)
    return {name: arr.shape for name, arr in model.state().items()}


def decode_checkpoint(buf: bytes) -> Checkpoint:
    if len(buf) < 9:
        raise TruncatedPayloadError(f"checkpoint is only {len(buf)} bytes")
    if buf[:4] != MAGIC:
        raise CorruptHeaderError(f"bad checkpoint magic {buf[:4]!r}")
    if buf[4] != VERSION:
        raise CorruptHeaderError(f"unsupported checkpoint version {buf[4]}")
    (head_len,) = struct.unpack("<I", buf[5:9])
    if 9 + head_len > len(buf):
        raise TruncatedPayloadError("checkpoint header extends past end of file")
    try:
        header = json.loads(buf[9:9 + head_len].decode("utf-8"))
        config = ModelConfig.from_dict(header["config"])
        directory = header["tensors"]
    except (UnicodeDecodeError, json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise CorruptHeaderError(f"unreadable checkpoint header: {exc}") from exc

    payload = memoryview(buf)[9 + head_len:]
    need = sum(int(e["length"]) for e in directory)
    if len(payload) < need:
        raise TruncatedPayloadError(f"checkpoint payload has {len(payload)} bytes, directory needs {need}")
    if len(payload) > need:
        raise CorruptHeaderError(f"{len(payload) - need} unexpected trailing bytes in checkpoint")

    expected = expected_shapes(config)
    tensors, velocities = {}, {}
    for e in directory:
        name, shape = e["name"], tuple(e["shape"])
        start, length = int(e["offset"]), int(e["length"])
        if length != 4 * int(np.prod(shape, dtype=np.int64)):
            raise ShapeMismatchError(f"{name}: {length} bytes cannot hold shape {shape}")
        arr = np.frombuffer(payload[start:start + length], dtype="<f4").astype(np.float32).reshape(shape)
        if name.startswith(VELOCITY_PREFIX):
            base = name[len(VELOCITY_PREFIX):]
            if expected.get(base) != shape:
                raise ShapeMismatchError(f"velocity for {base!r} has shape {shape}")
            velocities[base] = arr
        else:
            if name not in expected:
                raise ShapeMismatchError(f"checkpoint tensor {name!r} does not exist in the configured model")
            if expected[name] != shape:
                raise ShapeMismatchError(f"{name}: stored {shape}, config implies {expected[name]}")
            tensors[name] = arr
    missing = set(expected) - set(tensors)
    if missing:
        raise ShapeMismatchError(f"checkpoint lacks tensors: {sorted(missing)[:5]}")
    return Checkpoint(config, tensors, header.get("optimizer"), velocities, header.get("extra") or {})


def load_checkpoint(path) -> Checkpoint:
    return decode_checkpoint(Path(path).read_bytes())
