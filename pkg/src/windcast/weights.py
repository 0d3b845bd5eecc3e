"""Versioned binary container for model weights.

Layout (all integers little-endian):

    magic   4 bytes  b"WNDC"
    version u32      currently 1
    payload:
        kind          u32 length + utf-8 bytes
        input shape   u32 rank + rank * u32 extents
        targets       u32
        record count  u32
        records       u32 name length + name utf-8
                      + u32 rank + rank * u32 extents
                      + float64 little-endian values (row-major)
    crc32   u32      of the payload bytes

Records cover trainable parameters and batch-norm running statistics, so a
round trip reproduces eval-mode forwards bit for bit. Loading validates the
descriptor against the target model's spec and the checksum before touching
any model state; a corrupt or mismatched stream never yields a partial model.
"""

from __future__ import annotations

import struct
import zlib
from typing import List, Tuple

import numpy as np

from .models import Model, ModelSpec

MAGIC = b"WNDC"
VERSION = 1


class FormatError(ValueError):
    """Weight stream is corrupt, truncated, or does not match the model."""


def _pack_str(s: str) -> bytes:
    raw = s.encode("utf-8")
    return struct.pack("<I", len(raw)) + raw


def _pack_shape(shape) -> bytes:
    return struct.pack("<I", len(shape)) + b"".join(struct.pack("<I", e) for e in shape)


def _pack_record(name: str, arr: np.ndarray) -> bytes:
    values = np.ascontiguousarray(arr, dtype="<f8").tobytes()
    return _pack_str(name) + _pack_shape(arr.shape) + values


class _Reader:
    def __init__(self, data: bytes, offset: int = 0):
        self.data = data
        self.offset = offset

    def take(self, n: int) -> bytes:
        if self.offset + n > len(self.data):
            raise FormatError("truncated weight stream")
        chunk = self.data[self.offset:self.offset + n]
        self.offset += n
        return chunk

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def string(self) -> str:
        n = self.u32()
        try:
            return self.take(n).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise FormatError("malformed name in weight stream") from exc

    def shape(self) -> tuple:
        rank = self.u32()
        if rank > 8:
            raise FormatError(f"implausible record rank {rank}")
        return tuple(self.u32() for _ in range(rank))

    def array(self, shape: tuple) -> np.ndarray:
        count = int(np.prod(shape)) if shape else 1
        raw = self.take(8 * count)
        return np.frombuffer(raw, dtype="<f8").astype(np.float64).reshape(shape)


def save_weights(model: Model) -> bytes:
    """Serialize a model's parameters and running statistics."""
    spec = model.spec
    payload = _pack_str(spec.kind)
    payload += _pack_shape(spec.input_shape)
    payload += struct.pack("<I", spec.targets)
    records: List[Tuple[str, np.ndarray]] = model.state_arrays()
    payload += struct.pack("<I", len(records))
    for name, arr in records:
        payload += _pack_record(name, arr)
    return MAGIC + struct.pack("<I", VERSION) + payload + struct.pack("<I", zlib.crc32(payload))


def load_weights(model: Model, data: bytes) -> Model:
    """Fill ``model`` from a weight stream; the descriptor must match its spec."""
    if len(data) < 12 or data[:4] != MAGIC:
        raise FormatError("not a weight stream (bad magic)")
    version = struct.unpack("<I", data[4:8])[0]
    if version != VERSION:
        raise FormatError(f"unsupported weight format version {version}")
    payload, crc_bytes = data[8:-4], data[-4:]
    if struct.unpack("<I", crc_bytes)[0] != zlib.crc32(payload):
        raise FormatError("checksum mismatch")

    r = _Reader(payload)
    kind = r.string()
    input_shape = r.shape()
    targets = r.u32()
    found = ModelSpec(kind, tuple(int(e) for e in input_shape), int(targets))
    if found != model.spec:
        raise FormatError(f"weight stream is for {found}, model expects {model.spec}")

    count = r.u32()
    loaded = {}
    for _ in range(count):
        name = r.string()
        shape = r.shape()
        loaded[name] = r.array(shape)
    if r.offset != len(payload):
        raise FormatError("trailing bytes after records")

    expected = model.state_arrays()
    expected_names = [name for name, _ in expected]
    if sorted(loaded) != sorted(expected_names):
        missing = sorted(set(expected_names) - set(loaded))
        extra = sorted(set(loaded) - set(expected_names))
        raise FormatError(f"record names do not match model (missing {missing}, extra {extra})")
    for name, arr in expected:
        if loaded[name].shape != arr.shape:
            raise FormatError(f"record {name!r} has shape {loaded[name].shape}, expected {arr.shape}")

    # all validated; now it is safe to mutate the model
    param_names = set()
    for name, tensor in model.parameters():
        tensor.data = loaded[name]
        param_names.add(name)
    for name, arr in expected:
        if name not in param_names:  # running statistics: overwrite in place
            arr[...] = loaded[name]
    return model


def save_weights_file(model: Model, path) -> None:
    with open(path, "wb") as fh:
        fh.write(save_weights(model))


def load_weights_file(model: Model, path) -> Model:
    with open(path, "rb") as fh:
        return load_weights(model, fh.read())
