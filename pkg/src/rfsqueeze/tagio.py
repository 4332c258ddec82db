"""PTAG1 binary time-tag files.

Layout (little-endian)::

    header  magic     5s   b"PTAG1"
            version   u16
            res_ps    u64  picoseconds per tick (>= 1)
            channels  u8   highest channel label + 1 (0 for an empty file)
            records   u64
    record  time      u64  ticks
            channel   u8
            reserved  7 zero bytes

Records are sorted by time. Header is 24 bytes, records 16 bytes each.
"""

from __future__ import annotations

import os
import struct

import numpy as np

from .tags import TagStream

MAGIC = b"PTAG1"
VERSION = 1
HEADER = struct.Struct("<5sHQBQ")
RECORD_DTYPE = np.dtype([("time", "<u8"), ("channel", "u1"), ("reserved", "V7")])
assert HEADER.size == 24 and RECORD_DTYPE.itemsize == 16


class TagFileError(ValueError):
    """Base class for malformed PTAG files."""


class BadMagicError(TagFileError):
    pass


class TruncatedFileError(TagFileError):
    pass


class UnsortedRecordsError(TagFileError):
    pass


class RecordCountError(TagFileError):
    pass


class ChannelRangeError(TagFileError):
    pass


class UnsupportedVersionError(TagFileError):
    pass


def _resolution_ps(resolution: float) -> int:
    ps = resolution / 1e-12
    n = round(ps)
    if n < 1 or abs(ps - n) > 1e-6 * max(n, 1):
        raise ValueError(f"resolution {resolution!r} s is not a whole number of picoseconds")
    return n


def encode(stream: TagStream) -> bytes:
    if not stream.is_sorted:
        raise UnsortedRecordsError("cannot write an unsorted stream")
    n = len(stream)
    channels = int(stream.channels.max()) + 1 if n else 0
    if channels > 255:
        raise ChannelRangeError("channel 255 cannot be declared in an 8-bit channel_count")
    header = HEADER.pack(MAGIC, VERSION, _resolution_ps(stream.resolution), channels, n)
    rec = np.zeros(n, RECORD_DTYPE)
    rec["time"] = stream.times
    rec["channel"] = stream.channels
    return header + rec.tobytes()


def decode(data: bytes | memoryview) -> TagStream:
    data = memoryview(data)
    if len(data) < len(MAGIC) or bytes(data[: len(MAGIC)]) != MAGIC:
        raise BadMagicError("bad magic: not a PTAG1 file")
    if len(data) < HEADER.size:
        raise TruncatedFileError(f"truncated header: {len(data)} of {HEADER.size} bytes")
    _, version, res_ps, n_channels, n = HEADER.unpack_from(data)
    if version != VERSION:
        raise UnsupportedVersionError(f"unsupported PTAG version {version}")
    if res_ps < 1:
        raise TagFileError("resolution_ps must be >= 1")
    body = len(data) - HEADER.size
    expected = n * RECORD_DTYPE.itemsize
    if body < expected:
        raise TruncatedFileError(f"truncated file: header declares {n} records, {body} bytes of records present")
    if body > expected:
        raise RecordCountError(
            f"record_count mismatch: header declares {n} records but {body / RECORD_DTYPE.itemsize:g} are present"
        )
    rec = np.frombuffer(data, RECORD_DTYPE, count=n, offset=HEADER.size)
    times = rec["time"].copy()
    channels = rec["channel"].copy()
    if n > 1 and not np.all(times[1:] >= times[:-1]):
        raise UnsortedRecordsError("records are not sorted by time")
    if n and int(channels.max()) >= n_channels:
        raise ChannelRangeError(f"channel {int(channels.max())} outside declared channel_count {n_channels}")
    return TagStream(times, channels, res_ps * 1e-12)


def write_tags(stream: TagStream, path: str | os.PathLike) -> None:
    payload = encode(stream)
    with open(path, "wb") as fh:
        fh.write(payload)


def read_tags(path: str | os.PathLike) -> TagStream:
    with open(path, "rb") as fh:
        return decode(fh.read())
