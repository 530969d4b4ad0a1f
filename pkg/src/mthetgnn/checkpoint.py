"""Versioned binary checkpoint format.

Layout (all integers little-endian)::

    magic        8 bytes   b"MTHGNNCK"
    version      uint32    currently 1
    header_len   uint32
    header       header_len bytes of UTF-8 JSON (sorted keys)
    n_entries    uint32
    entries      n_entries times:
                   name_len uint16, name (UTF-8),
                   ndim uint8, dims uint32 * ndim,
                   values float64 * prod(dims), C order
    digest       32 bytes  SHA-256 of every preceding byte

Entries hold model parameters (``temporal.*``, ``hetgnn.*``, ``readout.*``),
the relation stack (``relation.<tag>``) and the normalization scales
(``dataset.scale``). The header carries every config needed to rebuild the
model plus ``config_hash`` and the hash of the manifest it was trained from.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import CheckpointError

MAGIC = b"MTHGNNCK"
VERSION = 1


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def config_hash(obj) -> str:
    return hashlib.sha256(canonical_json(obj).encode()).hexdigest()


@dataclass
class Checkpoint:
    header: dict
    arrays: dict[str, np.ndarray] = field(default_factory=dict)


def encode(ckpt: Checkpoint) -> bytes:
    parts = [MAGIC, struct.pack("<I", VERSION)]
    header = canonical_json(ckpt.header).encode()
    parts += [struct.pack("<I", len(header)), header, struct.pack("<I", len(ckpt.arrays))]
    for name, value in ckpt.arrays.items():
        arr = np.asarray(value, dtype="<f8")
        raw_name = name.encode()
        parts.append(struct.pack("<H", len(raw_name)) + raw_name)
        parts.append(struct.pack("<B", arr.ndim) + struct.pack(f"<{arr.ndim}I", *arr.shape))
        parts.append(arr.tobytes(order="C"))
    body = b"".join(parts)
    return body + hashlib.sha256(body).digest()


def decode(blob: bytes) -> Checkpoint:
    if len(blob) < len(MAGIC) + 40 or blob[: len(MAGIC)] != MAGIC:
        raise CheckpointError("not a checkpoint file (bad magic)")
    body, digest = blob[:-32], blob[-32:]
    if hashlib.sha256(body).digest() != digest:
        raise CheckpointError("checkpoint digest mismatch (file corrupted or modified)")
    pos = len(MAGIC)

    def read(fmt: str):
        nonlocal pos
        size = struct.calcsize(fmt)
        if pos + size > len(body):
            raise CheckpointError("truncated checkpoint")
        out = struct.unpack_from(fmt, body, pos)
        pos += size
        return out

    (version,) = read("<I")
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    (hlen,) = read("<I")
    header = json.loads(body[pos : pos + hlen].decode())
    pos += hlen
    (count,) = read("<I")
    arrays = {}
    for _ in range(count):
        (nlen,) = read("<H")
        name = body[pos : pos + nlen].decode()
        pos += nlen
        (ndim,) = read("<B")
        shape = read(f"<{ndim}I") if ndim else ()
        size = int(np.prod(shape)) if shape else 1
        if pos + 8 * size > len(body):
            raise CheckpointError(f"truncated data for entry {name!r}")
        arrays[name] = np.frombuffer(body, dtype="<f8", count=size, offset=pos).reshape(shape).astype(np.float64)
        pos += 8 * size
    if pos != len(body):
        raise CheckpointError("trailing bytes after last entry")
    return Checkpoint(header, arrays)


def save(ckpt: Checkpoint, path) -> None:
    Path(path).write_bytes(encode(ckpt))


def load(path) -> Checkpoint:
    path = Path(path)
    if not path.is_file():
        raise CheckpointError(f"no such checkpoint: {path}")
    return decode(path.read_bytes())
