"""Binary snapshot files.

Layout (little-endian)::

    magic   b"DMNLS1\\0"   7 bytes
    version u8             currently 1
    dim     u8
    n       u32
    L       f64            box length
    t       f64            time stamp
    data    n**dim complex values as interleaved (re f64, im f64), row-major
"""
import struct

import numpy as np

from .spectral import Field, make_grid

MAGIC = b"DMNLS1\x00"
VERSION = 1
_HEADER = struct.Struct("<7sBBIdd")


class SnapshotFormatError(ValueError):
    pass


def encode(field):
    field._require_physical()
    g = field.grid
    t = 0.0 if field.t is None else float(field.t)
    head = _HEADER.pack(MAGIC, VERSION, g.dim, g.n, float(g.box_length), t)
    return head + np.ascontiguousarray(field.values, dtype="<c16").tobytes()


def decode(buf):
    if len(buf) < _HEADER.size:
        raise SnapshotFormatError("truncated snapshot header")
    magic, version, dim, n, box_length, t = _HEADER.unpack_from(buf)
    if magic != MAGIC:
        raise SnapshotFormatError(f"bad magic {magic!r}")
    if version != VERSION:
        raise SnapshotFormatError(f"unsupported snapshot version {version}")
    grid = make_grid(dim, n, box_length)
    expected = _HEADER.size + 16 * grid.size
    if len(buf) != expected:
        raise SnapshotFormatError(f"snapshot has {len(buf)} bytes, expected {expected}")
    vals = np.frombuffer(buf, dtype="<c16", offset=_HEADER.size).reshape(grid.shape)
    return Field(grid, vals.astype(np.complex128), t)


def write_snapshot(path, field):
    with open(path, "wb") as fh:
        fh.write(encode(field))


def read_snapshot(path):
    with open(path, "rb") as fh:
        return decode(fh.read())
