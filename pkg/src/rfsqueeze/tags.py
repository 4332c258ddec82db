"""Detector time-tag streams and the detector dead-time filter."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEFAULT_RESOLUTION = 1e-12  # seconds per tick


class UnsortedStreamError(ValueError):
    pass


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class TagStream:
    """Click timestamps (integer ticks) with per-click channel labels.

    Arrays are stored read-only so streams can be shared freely.
    """

    times: np.ndarray
    channels: np.ndarray
    resolution: float = DEFAULT_RESOLUTION

    def __post_init__(self) -> None:
        times = np.ascontiguousarray(self.times, dtype=np.uint64)
        channels = np.ascontiguousarray(self.channels, dtype=np.uint8)
        if times.ndim != 1 or times.shape != channels.shape:
            raise ValueError("times and channels must be 1-D arrays of equal length")
        if not self.resolution > 0:
            raise ValueError(f"resolution: must be > 0, got {self.resolution!r}")
        object.__setattr__(self, "times", _readonly(times))
        object.__setattr__(self, "channels", _readonly(channels))

    @classmethod
    def empty(cls, resolution: float = DEFAULT_RESOLUTION) -> "TagStream":
        return cls(np.empty(0, np.uint64), np.empty(0, np.uint8), resolution)

    @classmethod
    def single_channel(cls, times, channel: int = 0, resolution: float = DEFAULT_RESOLUTION) -> "TagStream":
        times = np.asarray(times, dtype=np.uint64)
        return cls(times, np.full(times.shape, channel, np.uint8), resolution)

    def __len__(self) -> int:
        return int(self.times.size)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, TagStream):
            return NotImplemented
        return (
            self.resolution == other.resolution
            and np.array_equal(self.times, other.times)
            and np.array_equal(self.channels, other.channels)
        )

    @property
    def is_sorted(self) -> bool:
        return bool(self.times.size < 2 or np.all(self.times[1:] >= self.times[:-1]))

    def channel_ids(self) -> list[int]:
        return [int(c) for c in np.unique(self.channels)]

    def select(self, channel: int) -> "TagStream":
        mask = self.channels == channel
        return TagStream(self.times[mask], self.channels[mask], self.resolution)

    def seconds(self) -> np.ndarray:
        return self.times.astype(np.float64) * self.resolution

    def relabel(self, channel: int) -> "TagStream":
        return TagStream(self.times, np.full(self.times.shape, channel, np.uint8), self.resolution)


def merge(*streams: TagStream) -> TagStream:
    """Merge streams into one time-sorted stream (stable: ties keep argument order)."""
    if not streams:
        return TagStream.empty()
    res = streams[0].resolution
    if any(s.resolution != res for s in streams):
        raise ValueError("cannot merge streams with different resolutions")
    times = np.concatenate([s.times for s in streams])
    channels = np.concatenate([s.channels for s in streams])
    order = np.argsort(times, kind="stable")
    return TagStream(times[order], channels[order], res)


def _dead_time_mask(times: np.ndarray, dead: int) -> np.ndarray:
    """Keep-mask of the non-paralyzable rule for one channel.

    A tag whose gap to its immediate predecessor is >= dead is always kept,
    because the last kept tag can only be earlier. Only runs of short gaps
    need the sequential pass.
    """
    n = times.size
    keep = np.ones(n, dtype=bool)
    if n < 2 or dead <= 0:
        return keep
    short = np.diff(times) < np.uint64(dead)
    if not short.any():
        return keep
    # tag i+1 is in a cluster when short[i]; walk each cluster from its head
    idx = np.flatnonzero(short) + 1
    t = times.tolist()
    last_kept = -1
    last_i = -2
    for i in idx.tolist():
        if i - 1 != last_i:
            # cluster head i-1 is kept: its own predecessor gap was long (or it is tag 0)
            last_kept = t[i - 1]
        if t[i] - last_kept >= dead:
            last_kept = t[i]
        else:
            keep[i] = False
        last_i = i
    return keep


def apply_dead_time(stream: TagStream, dead_time: float) -> TagStream:
    """Non-paralyzable dead time per channel: keep a tag iff it is at least
    ``dead_time`` after the last kept tag on the same channel."""
    if not stream.is_sorted:
        raise UnsortedStreamError("apply_dead_time requires a time-sorted stream")
    if dead_time < 0:
        raise ValueError(f"dead_time: must be >= 0, got {dead_time!r}")
    dead = int(round(dead_time / stream.resolution))
    if dead == 0 or len(stream) < 2:
        return stream
    keep = np.ones(len(stream), dtype=bool)
    for ch in stream.channel_ids():
        sel = np.flatnonzero(stream.channels == ch)
        keep[sel] = _dead_time_mask(stream.times[sel], dead)
    if keep.all():
        return stream
    return TagStream(stream.times[keep], stream.channels[keep], stream.resolution)
