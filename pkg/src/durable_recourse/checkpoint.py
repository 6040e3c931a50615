"""Versioned little-endian binary records used for every checkpoint.

Layout::

    b"RARN" | u16 version | u8 kind | u32 header_len | header (UTF-8 JSON,
    sorted keys) | u32 n_arrays | per array: u16 name_len, name, u8 ndim,
    u32 * ndim shape, float64 * prod(shape) data
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .errors import CheckpointFormatError

MAGIC = b"RARN"
VERSION = 1
KINDS = {"scorer": 0, "recommender": 1, "predictor": 2}
_KIND_NAMES = {v: k for k, v in KINDS.items()}


def encode(kind, header, arrays):
    if kind not in KINDS:
        raise ValueError(f"unknown checkpoint kind {kind!r}")
    head = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    parts = [MAGIC, struct.pack("<HBI", VERSION, KINDS[kind], len(head)), head,
             struct.pack("<I", len(arrays))]
    for name, arr in arrays.items():
        arr = np.array(arr, dtype="<f8", order="C")
        key = name.encode()
        parts.append(struct.pack("<H", len(key)) + key)
        parts.append(struct.pack("<B", arr.ndim) + struct.pack(f"<{arr.ndim}I", *arr.shape))
        parts.append(arr.tobytes())
    return b"".join(parts)


def decode(blob):
    """Return ``(kind, header, arrays)``."""
    if blob[:4] != MAGIC:
        raise CheckpointFormatError("missing RARN magic bytes")
    try:
        version, kind_tag, hlen = struct.unpack_from("<HBI", blob, 4)
        if version != VERSION:
            raise CheckpointFormatError(f"unsupported format version {version}")
        pos = 4 + struct.calcsize("<HBI")
        header = json.loads(blob[pos:pos + hlen].decode())
        pos += hlen
        (count,) = struct.unpack_from("<I", blob, pos)
        pos += 4
        arrays = {}
        for _ in range(count):
            (nlen,) = struct.unpack_from("<H", blob, pos)
            pos += 2
            name = blob[pos:pos + nlen].decode()
            pos += nlen
            (ndim,) = struct.unpack_from("<B", blob, pos)
            pos += 1
            shape = struct.unpack_from(f"<{ndim}I", blob, pos)
            pos += 4 * ndim
            size = int(np.prod(shape)) if ndim else 1
            arrays[name] = np.frombuffer(blob, dtype="<f8", count=size, offset=pos).reshape(shape).copy()
            pos += 8 * size
    except (struct.error, ValueError, UnicodeDecodeError) as exc:
        if isinstance(exc, CheckpointFormatError):
            raise
        raise CheckpointFormatError(f"truncated or corrupt record: {exc}") from exc
    if pos != len(blob):
        raise CheckpointFormatError(f"{len(blob) - pos} trailing bytes")
    if kind_tag not in _KIND_NAMES:
        raise CheckpointFormatError(f"unknown kind tag {kind_tag}")
    return _KIND_NAMES[kind_tag], header, arrays


def save(path, kind, header, arrays):
    Path(path).write_bytes(encode(kind, header, arrays))


def load(path, expect_kind=None):
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"checkpoint not found: {path}")
    kind, header, arrays = decode(path.read_bytes())
    if expect_kind is not None and kind != expect_kind:
        raise CheckpointFormatError(f"{path} holds a {kind} checkpoint, expected {expect_kind}")
    return header, arrays
