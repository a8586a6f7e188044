"""
TTAG1 time-tag files.

Layout: the 5-byte magic b"TTAG1", then packed little-endian records of
(u8 channel, u64 picosecond timestamp). Records are written channel by channel,
each channel in time order.
"""

from typing import Dict, Sequence

import numpy as np

from .errors import InvalidParameterError
from .photon_counting import TimeTagStream
from .toolbox import atomic_write_bytes

MAGIC = b"TTAG1"

RECORD_DTYPE = np.dtype([("channel", "u1"), ("tag", "<u8")])


def write_ttag(path: str, streams: Sequence[TimeTagStream]) -> str:
    """
    Writes streams to a TTAG1 file.

    Raises:
      InvalidParameterError: On negative timestamps or a channel outside 0..255.
    """
    parts = [MAGIC]
    for stream in streams:
        if not 0 <= stream.channel <= 255:
            raise InvalidParameterError(f"channel must fit in one byte (got {stream.channel})")
        if len(stream) and stream.ticks[0] < 0:
            raise InvalidParameterError(f"channel {stream.channel} has negative timestamps")
        records = np.empty(len(stream), dtype=RECORD_DTYPE)
        records["channel"] = stream.channel
        records["tag"] = stream.ticks.astype(np.uint64)
        parts.append(records.tobytes())
    return atomic_write_bytes(path, b"".join(parts))


def read_ttag(path: str) -> Dict[int, TimeTagStream]:
    """
    Reads a TTAG1 file into one TimeTagStream per channel.

    Raises:
      InvalidParameterError: On a bad magic header or a truncated record.
    """
    with open(path, "rb") as f:
        data = f.read()
    if not data.startswith(MAGIC):
        raise InvalidParameterError(f"{path}: missing TTAG1 header")
    body = data[len(MAGIC):]
    if len(body) % RECORD_DTYPE.itemsize:
        raise InvalidParameterError(f"{path}: truncated record ({len(body)} bytes after header)")
    records = np.frombuffer(body, dtype=RECORD_DTYPE)

    streams = {}
    for channel in np.unique(records["channel"]):
        ticks = np.sort(records["tag"][records["channel"] == channel].astype(np.int64), kind="stable")
        streams[int(channel)] = TimeTagStream(int(channel), ticks)
    return streams
