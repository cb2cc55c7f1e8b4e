"""Time-tag streams: integer picosecond timestamps plus detector channel."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

PS_PER_S = 10**12
PS_PER_NS = 1000


@dataclass(frozen=True, eq=False)
class TagStream:
    """Time-ordered detection events.

    ``times`` are int64 picoseconds, ``channels`` uint16. ``duration`` is the
    acquisition length in ps and sets the denominator of count rates.
    """

    times: np.ndarray
    channels: np.ndarray
    duration: int

    def __post_init__(self):
        times = np.ascontiguousarray(self.times, dtype=np.int64)
        channels = np.asarray(self.channels)
        if channels.ndim == 0:
            channels = np.full(times.shape, int(channels))
        channels = np.ascontiguousarray(channels, dtype=np.uint16)
        if times.ndim != 1 or times.shape != channels.shape:
            raise ValueError("times and channels must be 1-D arrays of equal length")
        if times.size > 1 and np.any(times[1:] < times[:-1]):
            raise ValueError("tag times must be nondecreasing")
        if self.duration < 0:
            raise ValueError("duration must be non-negative")
        times.flags.writeable = False
        channels.flags.writeable = False
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "channels", channels)
        object.__setattr__(self, "duration", int(self.duration))

    @classmethod
    def from_unsorted(cls, times, channels, duration):
        times = np.asarray(times, dtype=np.int64)
        order = np.argsort(times, kind="stable")
        channels = np.broadcast_to(np.asarray(channels, dtype=np.uint16), times.shape)
        return cls(times[order], channels[order], duration)

    @classmethod
    def empty(cls, duration, channel=0):
        return cls(np.empty(0, np.int64), np.empty(0, np.uint16) + channel, duration)

    def __len__(self):
        return self.times.size

    def __eq__(self, other):
        if not isinstance(other, TagStream):
            return NotImplemented
        return (self.duration == other.duration
                and np.array_equal(self.times, other.times)
                and np.array_equal(self.channels, other.channels))

    @property
    def duration_s(self):
        return self.duration / PS_PER_S

    @property
    def channel_set(self):
        return tuple(int(c) for c in np.unique(self.channels))

    def select(self, channel):
        mask = self.channels == channel
        return TagStream(self.times[mask], self.channels[mask], self.duration)

    def with_channel(self, channel):
        return TagStream(self.times, np.full(self.times.shape, channel, np.uint16), self.duration)

    def merge(self, *others):
        streams = (self,) + others
        times = np.concatenate([s.times for s in streams])
        channels = np.concatenate([s.channels for s in streams])
        return TagStream.from_unsorted(times, channels, max(s.duration for s in streams))
