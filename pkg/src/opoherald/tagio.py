"""Bit-exact time-tag file I/O (QTT1 format).

Layout, little-endian throughout::

    header, 16 bytes: magic 'QTT1' | version u16 | resolution_fs u32
                      | channel_count u16 | reserved u32
    records, 12 bytes each: timestamp u64 (resolution units)
                            | channel u16 | flags u16

Timestamps must be non-decreasing.  The default resolution is 1000 fs
(1 ps), matching the in-memory time base.
"""

from __future__ import annotations

import struct

import numpy as np

from .errors import InputError, TagFileCorruptionError, TagFileFormatError
from .model import EventStream

MAGIC = b"QTT1"
VERSION = 1
DEFAULT_RESOLUTION_FS = 1000

_HEADER = struct.Struct("<4sHIHI")
RECORD_DTYPE = np.dtype([("time", "<u8"), ("channel", "<u2"), ("flags", "<u2")])


def write_tags(stream: EventStream, path, resolution_fs: int = DEFAULT_RESOLUTION_FS) -> None:
    """Write an event stream; timestamps are converted to resolution units."""
    if resolution_fs <= 0:
        raise InputError("resolution must be positive")
    n_channels = (max(stream.channel_set) + 1) if stream.channel_set else 0
    records = np.empty(len(stream), dtype=RECORD_DTYPE)
    if resolution_fs == 1000:
        records["time"] = stream.times.astype(np.uint64)
    else:
        records["time"] = (stream.times * (1000.0 / resolution_fs)).astype(np.uint64)
    records["channel"] = stream.channels
    records["flags"] = 0
    with open(path, "wb") as f:
        f.write(_HEADER.pack(MAGIC, VERSION, resolution_fs, n_channels, 0))
        records.tofile(f)


def read_tags(path, duration: int | None = None) -> EventStream:
    """Read a QTT1 file back into an :class:`EventStream`.

    The format does not store the run duration; pass it explicitly or the
    last timestamp + 1 is used.
    """
    with open(path, "rb") as f:
        header = f.read(_HEADER.size)
        if len(header) < _HEADER.size:
            raise TagFileFormatError("file shorter than the 16-byte header")
        magic, version, resolution_fs, n_channels, _reserved = _HEADER.unpack(header)
        if magic != MAGIC:
            raise TagFileFormatError(f"bad magic {magic!r}")
        if version != VERSION:
            raise TagFileFormatError(f"unsupported version {version}")
        records = np.fromfile(f, dtype=RECORD_DTYPE)

    raw = records["time"]
    if raw.size:
        steps = np.diff(raw.view(np.int64))
        if steps.size and steps.min() < 0:
            index = int(np.argmax(steps < 0)) + 1
            raise TagFileCorruptionError(index)
    if resolution_fs == 1000:
        times = raw.astype(np.int64)
    else:
        times = np.rint(raw * (resolution_fs / 1000.0)).astype(np.int64)
    if duration is None:
        duration = int(times[-1]) + 1 if times.size else 1
    channels = records["channel"].astype(np.uint16)
    declared = frozenset(range(n_channels)) | frozenset(int(c) for c in np.unique(channels))
    return EventStream(times, channels, declared, duration, validate=False)
