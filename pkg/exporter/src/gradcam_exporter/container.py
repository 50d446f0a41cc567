"""Writer for the AIOU v1 map archive format.

Layout, all little-endian: 4-byte magic "AIOU", version byte 0x01, uint64
record count, then per record a uint16 name length, the UTF-8 name
("<image_id>/<attribute>", exactly one '/'), one kind byte (0 attention),
uint32 height, uint32 width, and height*width float32 values row-major.

This is the downstream toolkit's on-disk interface; the exporter only ever
writes attention records.
"""

from __future__ import annotations

import struct
from typing import BinaryIO, Iterable

import numpy as np

MAGIC = b"AIOU"
VERSION = 1
KIND_ATTENTION = 0
_HEADER = struct.Struct("<4sBQ")
_REC_HEAD = struct.Struct("<H")
_REC_DIMS = struct.Struct("<BII")


def write_attention_container(
    records: Iterable[tuple[str, np.ndarray]], destination: BinaryIO
) -> int:
    """Write (name, map) pairs; returns the number of bytes written."""
    records = list(records)
    names = set()
    for name, data in records:
        if name.count("/") != 1:
            raise ValueError(f"record name must contain exactly one '/': {name!r}")
        if name in names:
            raise ValueError(f"duplicate record name {name!r}")
        if data.ndim != 2:
            raise ValueError(f"map for {name!r} must be 2-D")
        names.add(name)

    written = destination.write(_HEADER.pack(MAGIC, VERSION, len(records)))
    for name, data in records:
        encoded = name.encode("utf-8")
        written += destination.write(_REC_HEAD.pack(len(encoded)))
        written += destination.write(encoded)
        written += destination.write(
            _REC_DIMS.pack(KIND_ATTENTION, data.shape[0], data.shape[1])
        )
        written += destination.write(np.ascontiguousarray(data, dtype="<f4").tobytes())
    return written
