"""Binary checkpoint files.

Layout (all integers little-endian)::

    magic      8 bytes   b"FCNETCKP"
    version    u32
    length     u64       total file size in bytes
    cfg_len    u32, then cfg_len bytes of UTF-8 JSON (FcnetConfig fields)
    count      u32       number of tensors
    per tensor:
        name_len u16, name bytes (UTF-8)
        ndim     u8, then ndim x u32 dims
        data     prod(dims) x f64 little-endian IEEE-754
    crc32      u32 over every preceding byte

A file is fully parsed and checked before any parameters are returned.
"""
from __future__ import annotations

import json
import os
import struct
import zlib
from pathlib import Path

import numpy as np

from .model import FcnetConfig, FcnetParams, param_shapes

MAGIC = b"FCNETCKP"
VERSION = 1

__all__ = [
    "CheckpointError",
    "CheckpointFormatError",
    "CheckpointVersionError",
    "CheckpointTruncatedError",
    "save_checkpoint",
    "load_checkpoint",
]


class CheckpointError(Exception):
    """Base class for unreadable checkpoints."""


class CheckpointFormatError(CheckpointError):
    pass


class CheckpointVersionError(CheckpointError):
    pass


class CheckpointTruncatedError(CheckpointError):
    pass


def _encode(p: FcnetParams) -> bytes:
    parts = [MAGIC, struct.pack("<I", VERSION)]
    cfg_blob = json.dumps(p.cfg.to_dict(), sort_keys=True).encode()
    parts += [struct.pack("<I", len(cfg_blob)), cfg_blob]
    parts.append(struct.pack("<I", len(p.tensors)))
    for name, arr in p.tensors.items():
        raw = name.encode()
        parts.append(struct.pack("<H", len(raw)) + raw)
        parts.append(struct.pack("<B", arr.ndim) + struct.pack(f"<{arr.ndim}I", *arr.shape))
        parts.append(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    rest = b"".join(parts[2:])
    total = len(MAGIC) + 4 + 8 + len(rest) + 4
    body = parts[0] + parts[1] + struct.pack("<Q", total) + rest
    return body + struct.pack("<I", zlib.crc32(body))


def save_checkpoint(p: FcnetParams, path: str | os.PathLike) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(_encode(p))
    os.replace(tmp, path)


class _Reader:
    def __init__(self, buf: bytes):
        self.buf = buf
        self.pos = 0

    def take(self, k: int) -> bytes:
        if self.pos + k > len(self.buf):
            raise CheckpointTruncatedError("checkpoint ends early")
        out = self.buf[self.pos : self.pos + k]
        self.pos += k
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def load_checkpoint(path: str | os.PathLike) -> FcnetParams:
    """Read a checkpoint. I/O problems surface as ``OSError``."""
    buf = Path(path).read_bytes()
    r = _Reader(buf)
    if r.take(len(MAGIC)) != MAGIC:
        raise CheckpointFormatError("not an FCNet checkpoint (bad magic)")
    (version,) = r.unpack("<I")
    if version != VERSION:
        raise CheckpointVersionError(f"unsupported checkpoint version {version}")
    (total,) = r.unpack("<Q")
    if len(buf) < total:
        raise CheckpointTruncatedError(f"checkpoint has {len(buf)} of {total} bytes")
    if len(buf) > total:
        raise CheckpointFormatError("trailing bytes after checkpoint")
    if zlib.crc32(buf[:-4]) != struct.unpack("<I", buf[-4:])[0]:
        raise CheckpointFormatError("checksum mismatch")

    (cfg_len,) = r.unpack("<I")
    try:
        cfg = FcnetConfig(**json.loads(r.take(cfg_len).decode()))
    except (ValueError, TypeError) as exc:
        raise CheckpointFormatError(f"bad config block: {exc}") from exc
    (count,) = r.unpack("<I")
    tensors: dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_len,) = r.unpack("<H")
        name = r.take(name_len).decode()
        (ndim,) = r.unpack("<B")
        shape = r.unpack(f"<{ndim}I")
        size = int(np.prod(shape, dtype=np.int64))
        arr = np.frombuffer(r.take(8 * size), dtype="<f8").reshape(shape)
        tensors[name] = arr.astype(np.float64)
    if r.pos != len(buf) - 4:
        raise CheckpointFormatError("trailing bytes after tensor table")

    expected = param_shapes(cfg)
    if list(tensors) != list(expected):
        raise CheckpointFormatError("tensor names do not match the stored config")
    for name, shape in expected.items():
        if tensors[name].shape != shape:
            raise CheckpointFormatError(f"{name}: shape {tensors[name].shape} != {shape}")
    return FcnetParams(cfg, tensors)

