"""Versioned binary container for fitted transforms and models.

Layout::

    magic   4 bytes   b"HYDB"
    version u16 LE
    hlen    u32 LE    length of the JSON header
    header  hlen bytes UTF-8 JSON {"kind", "meta", "arrays": [[name, dtype, shape], ...]}
    payload           arrays back to back, little-endian, C order
"""

import json
import struct

import numpy as np

MAGIC = b"HYDB"
VERSION = 1
_PREFIX = struct.Struct("<4sHI")


class BlobError(ValueError):
    pass


def pack(kind, meta, arrays):
    specs, chunks = [], []
    for name, arr in arrays.items():
        arr = np.ascontiguousarray(arr)
        dtype = arr.dtype.newbyteorder("<")
        specs.append([name, dtype.str, list(arr.shape)])
        chunks.append(arr.astype(dtype, copy=False).tobytes())
    header = json.dumps({"kind": kind, "meta": meta, "arrays": specs}).encode()
    return _PREFIX.pack(MAGIC, VERSION, len(header)) + header + b"".join(chunks)


def unpack(blob, kind=None):
    """Return ``(kind, meta, arrays)``; checks ``kind`` when given."""
    blob = bytes(blob)
    if len(blob) < _PREFIX.size:
        raise BlobError("truncated blob")
    magic, version, hlen = _PREFIX.unpack_from(blob)
    if magic != MAGIC:
        raise BlobError("not a hydrant blob")
    if version != VERSION:
        raise BlobError(f"unsupported blob version {version}")
    start = _PREFIX.size
    try:
        header = json.loads(blob[start : start + hlen].decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise BlobError(f"corrupt header: {exc}") from None
    if kind is not None and header["kind"] != kind:
        raise BlobError(f"expected a {kind!r} blob, got {header['kind']!r}")
    offset = start + hlen
    arrays = {}
    for name, dtype, shape in header["arrays"]:
        dtype = np.dtype(dtype)
        count = int(np.prod(shape, dtype=np.int64))
        size = dtype.itemsize * count
        if offset + size > len(blob):
            raise BlobError(f"truncated array {name!r}")
        arr = np.frombuffer(blob, dtype=dtype, count=count, offset=offset)
        arrays[name] = arr.reshape(shape).astype(dtype.newbyteorder("="))
        offset += size
    if offset != len(blob):
        raise BlobError("trailing bytes after payload")
    return header["kind"], header["meta"], arrays


def pack_many(parts):
    """Length-prefixed concatenation of several blobs."""
    out = [struct.pack("<I", len(parts))]
    for part in parts:
        out.append(struct.pack("<Q", len(part)))
        out.append(part)
    return b"".join(out)


def unpack_many(data):
    data = bytes(data)
    (count,) = struct.unpack_from("<I", data)
    offset, parts = 4, []
    for _ in range(count):
        (size,) = struct.unpack_from("<Q", data, offset)
        offset += 8
        parts.append(data[offset : offset + size])
        offset += size
    if offset != len(data):
        raise BlobError("trailing bytes after blob list")
    return parts
