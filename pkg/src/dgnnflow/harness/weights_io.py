"""DGNW weight files.

Layout, all integers unsigned 32-bit little-endian::

    b"DGNW" | version | tensor count
    per tensor: name length | UTF-8 name | rank | dims... | float32 LE payload
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from ..errors import BadMagic, ShapeOverflow, TruncatedFile, VersionMismatch, WeightFileError
from ..graph import WeightSet

MAGIC = b"DGNW"
VERSION = 1
MAX_RANK = 8
MAX_NAME = 4096
MAX_ELEMENTS = 1 << 31

_U32 = struct.Struct("<I")


def encode_weights(w: WeightSet) -> bytes:
    out = [MAGIC, _U32.pack(VERSION), _U32.pack(len(w))]
    for name, arr in w.items():
        nb = name.encode("utf-8")
        out += [_U32.pack(len(nb)), nb, _U32.pack(arr.ndim)]
        out += [_U32.pack(d) for d in arr.shape]
        out.append(arr.astype("<f4").tobytes())
    return b"".join(out)


def save_weights(w: WeightSet, path) -> None:
    Path(path).write_bytes(encode_weights(w))


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int, what: str) -> bytes:
        if self.pos + n > len(self.data):
            raise TruncatedFile(f"file ends at byte {len(self.data)} while reading {what} "
                                f"({n} bytes needed at offset {self.pos})")
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def u32(self, what: str) -> int:
        return _U32.unpack(self.take(4, what))[0]


def decode_weights(data: bytes) -> WeightSet:
    r = _Reader(data)
    if r.take(4, "magic") != MAGIC:
        raise BadMagic("not a DGNW weight file")
    version = r.u32("version")
    if version != VERSION:
        raise VersionMismatch(f"file version {version}, reader supports {VERSION}")
    count = r.u32("tensor count")
    tensors: dict[str, np.ndarray] = {}
    for i in range(count):
        n = r.u32(f"tensor {i} name length")
        if n > MAX_NAME:
            raise ShapeOverflow(f"tensor {i} name length {n} exceeds {MAX_NAME}")
        try:
            name = r.take(n, f"tensor {i} name").decode("utf-8")
        except UnicodeDecodeError:
            raise WeightFileError(f"tensor {i} name is not valid UTF-8") from None
        if name in tensors:
            raise WeightFileError(f"duplicate tensor name {name!r}")
        rank = r.u32(f"{name} rank")
        if rank > MAX_RANK:
            raise ShapeOverflow(f"{name}: rank {rank} exceeds {MAX_RANK}")
        dims = [r.u32(f"{name} dim {k}") for k in range(rank)]
        elems = 1
        for d in dims:
            elems *= d
        if elems > MAX_ELEMENTS:
            raise ShapeOverflow(f"{name}: {dims} has {elems} elements")
        payload = r.take(4 * elems, f"{name} payload")
        tensors[name] = np.frombuffer(payload, dtype="<f4").astype(np.float32).reshape(dims)
    if r.pos != len(data):
        raise WeightFileError(f"{len(data) - r.pos} trailing bytes after {count} tensors")
    return WeightSet(tensors)


def load_weights(path) -> WeightSet:
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise WeightFileError(f"cannot read {path}: {exc}") from None
    return decode_weights(data)
