"""SMAW weight container, written to the published byte layout.

Little-endian: magic "SMAW", u32 version (1), u32 tensor count; per tensor a
u16 name length, UTF-8 name, u8 rank, rank u32 dims, row-major f32 payload;
then the u32 CRC32 of everything before it. Tensors go out in name order so
equal contents produce byte-identical files.
"""

from __future__ import annotations

import os
import struct
import tempfile
import zlib
from pathlib import Path
from typing import Mapping

import numpy as np

MAGIC = b"SMAW"
VERSION = 1


class SmawError(ValueError):
    pass


def write_smaw(path, tensors: Mapping[str, np.ndarray]) -> None:
    buf = bytearray()
    buf += MAGIC
    buf += struct.pack("<II", VERSION, len(tensors))
    for name in sorted(tensors):
        arr = np.ascontiguousarray(tensors[name], dtype="<f4")
        encoded = name.encode("utf-8")
        buf += struct.pack("<H", len(encoded))
        buf += encoded
        buf += struct.pack("<B", arr.ndim)
        for dim in arr.shape:
            buf += struct.pack("<I", dim)
        buf += arr.tobytes()
    buf += struct.pack("<I", zlib.crc32(bytes(buf)))

    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or Path("."), prefix=path.name + ".")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(bytes(buf))
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_smaw(path) -> dict[str, np.ndarray]:
    with open(path, "rb") as fh:
        data = fh.read()
    pos = 0

    def take(n: int, what: str) -> bytes:
        nonlocal pos
        if pos + n > len(data):
            raise SmawError(f"truncated file while reading {what} at offset {pos}")
        chunk = data[pos : pos + n]
        pos += n
        return chunk

    if take(4, "magic") != MAGIC:
        raise SmawError("bad magic")
    version, count = struct.unpack("<II", take(8, "header"))
    if version != VERSION:
        raise SmawError(f"unsupported version {version}")
    tensors: dict[str, np.ndarray] = {}
    for index in range(count):
        (name_len,) = struct.unpack("<H", take(2, "name length"))
        name = take(name_len, "name").decode("utf-8")
        rank = take(1, "rank")[0]
        dims = [struct.unpack("<I", take(4, "dim"))[0] for _ in range(rank)]
        size = int(np.prod(dims)) if dims else 1
        payload = take(4 * size, f"tensor {name!r}")
        tensors[name] = np.frombuffer(payload, dtype="<f4").reshape(dims).copy()
    (stored,) = struct.unpack("<I", take(4, "checksum"))
    if stored != zlib.crc32(data[: pos - 4]):
        raise SmawError("checksum mismatch")
    if pos != len(data):
        raise SmawError("trailing bytes after checksum")
    return tensors
