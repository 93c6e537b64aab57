"""Binary parameter files.

Layout (little-endian)::

    magic  b"TQNNPARM"
    u32    format version
    u32    record count
    record*:
        u32    name length, then the UTF-8 name
        u32    rank, then rank x u32 extents
        f32    values, C order

Reading is all-or-nothing: a short or malformed file raises
:class:`~toriclab.errors.FormatError` before anything is returned.
"""
from __future__ import annotations

import io
import os
import struct

import numpy as np

from ..errors import FormatError

MAGIC = b"TQNNPARM"
VERSION = 1
_U32 = struct.Struct("<I")


def dumps(state: dict) -> bytes:
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(_U32.pack(VERSION))
    buf.write(_U32.pack(len(state)))
    for name, arr in state.items():
        raw = name.encode("utf-8")
        arr = np.asarray(arr)
        buf.write(_U32.pack(len(raw)))
        buf.write(raw)
        buf.write(_U32.pack(arr.ndim))
        for n in arr.shape:
            buf.write(_U32.pack(n))
        buf.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())
    return buf.getvalue()


def loads(blob: bytes) -> dict:
    view = memoryview(blob)
    pos = 0

    def take(n):
        nonlocal pos
        if pos + n > len(view):
            raise FormatError(f"parameter file truncated at byte {pos} (wanted {n} more)")
        out = view[pos:pos + n]
        pos += n
        return out

    def u32():
        return _U32.unpack(take(4))[0]

    if bytes(take(len(MAGIC))) != MAGIC:
        raise FormatError("not a parameter file (bad magic)")
    version = u32()
    if version != VERSION:
        raise FormatError(f"unsupported parameter file version {version}")
    count = u32()
    state = {}
    for _ in range(count):
        try:
            name = bytes(take(u32())).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise FormatError(f"bad tensor name: {exc}") from None
        if name in state:
            raise FormatError(f"duplicate tensor name {name!r}")
        shape = tuple(u32() for _ in range(u32()))
        size = int(np.prod(shape, dtype=np.int64))
        state[name] = np.frombuffer(take(4 * size), dtype="<f4").reshape(shape).astype(np.float32)
    if pos != len(view):
        raise FormatError(f"{len(view) - pos} trailing bytes after last record")
    return state


def save_state(path, state: dict):
    path = os.fspath(path)
    tmp = path + ".tmp"
    with open(tmp, "wb") as fh:
        fh.write(dumps(state))
    os.replace(tmp, path)


def load_state(path) -> dict:
    with open(os.fspath(path), "rb") as fh:
        return loads(fh.read())


__all__ = ["MAGIC", "VERSION", "dumps", "loads", "save_state", "load_state"]
