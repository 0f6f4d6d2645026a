"""Versioned binary checkpoint format.

Layout (all integers little-endian)::

    magic        8 bytes   b"GRDSCKPT"
    version      uint16    currently 1
    spec_len     uint32    length of the JSON-encoded ModelSpec
    spec         spec_len bytes, UTF-8 JSON
    n_tensors    uint32
    per tensor:
        name_len uint16, name (UTF-8)
        ndim     uint8,  dims (ndim x uint32)
        data     prod(dims) x float64

Tensors appear in layer order; names are ``"<layer index>.<param name>"``.
"""

import json
import struct

import numpy as np

from .errors import BadMagicError, CheckpointError, TruncatedCheckpointError, UnsupportedVersionError
from .model import ModelSpec, build_model

MAGIC = b"GRDSCKPT"
VERSION = 1


def save_checkpoint(model):
    spec = json.dumps(model.spec.to_dict(), sort_keys=True).encode("utf-8")
    params = model.named_params()
    out = [MAGIC, struct.pack("<HI", VERSION, len(spec)), spec, struct.pack("<I", len(params))]
    for name, arr in params.items():
        raw = name.encode("utf-8")
        out.append(struct.pack("<H", len(raw)) + raw)
        out.append(struct.pack(f"<B{arr.ndim}I", arr.ndim, *arr.shape))
        out.append(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    return b"".join(out)


class _Reader:
    def __init__(self, data):
        self.data = memoryview(data)
        self.pos = 0

    def take(self, n, what):
        if self.pos + n > len(self.data):
            raise TruncatedCheckpointError(
                f"checkpoint truncated while reading {what} at byte {self.pos} "
                f"(need {n}, have {len(self.data) - self.pos})"
            )
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt, what):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt), what))


def load_checkpoint(data):
    data = bytes(data)
    if len(data) < len(MAGIC):
        if MAGIC.startswith(data):
            raise TruncatedCheckpointError("checkpoint truncated inside the magic string")
        raise BadMagicError("not a gridscore checkpoint")
    if data[:len(MAGIC)] != MAGIC:
        raise BadMagicError("not a gridscore checkpoint (bad magic)")
    r = _Reader(data)
    r.pos = len(MAGIC)
    (version,) = r.unpack("<H", "version")
    if version != VERSION:
        raise UnsupportedVersionError(f"checkpoint version {version} is not supported (expected {VERSION})")
    (spec_len,) = r.unpack("<I", "spec length")
    try:
        spec = ModelSpec.from_dict(json.loads(bytes(r.take(spec_len, "model spec")).decode("utf-8")))
    except (ValueError, TypeError) as exc:
        raise CheckpointError(f"invalid model spec in checkpoint: {exc}") from exc
    model = build_model(spec)
    params = model.named_params()
    (count,) = r.unpack("<I", "tensor count")
    if count != len(params):
        raise CheckpointError(f"checkpoint holds {count} tensors, {spec.name} needs {len(params)}")
    for expected_name, target in params.items():
        (name_len,) = r.unpack("<H", "tensor name length")
        name = bytes(r.take(name_len, "tensor name")).decode("utf-8", errors="replace")
        (ndim,) = r.unpack("<B", f"rank of {name}")
        dims = r.unpack(f"<{ndim}I", f"shape of {name}")
        if name != expected_name or tuple(dims) != target.shape:
            raise CheckpointError(
                f"tensor {name} {tuple(dims)} does not match expected {expected_name} {target.shape}"
            )
        raw = r.take(8 * target.size, f"data of {name}")
        target[...] = np.frombuffer(raw, dtype="<f8").reshape(target.shape)
    if r.pos != len(data):
        raise CheckpointError(f"{len(data) - r.pos} unexpected trailing bytes in checkpoint")
    return model


def write_checkpoint(model, path):
    with open(path, "wb") as fh:
        fh.write(save_checkpoint(model))


def read_checkpoint(path):
    with open(path, "rb") as fh:
        return load_checkpoint(fh.read())
