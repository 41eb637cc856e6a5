"""Per-location access metadata shared by the clock-based detectors."""

from __future__ import annotations

from typing import Callable, NamedTuple

from .report import Endpoint
from .trace import Scope, ThreadId
from .vclock import Clock, CompressedClock, DenseClock, Shape


class AccessRecord(NamedTuple):
    time: int
    tid: ThreadId
    atomic: bool
    scope: Scope | None
    instr: int
    event: int

    def endpoint(self) -> Endpoint:
        return Endpoint(self.event, self.tid, self.instr)


class LocationState:
    """Last writer epoch plus the last read per thread for one location."""

    __slots__ = ("write", "readers")

    def __init__(self):
        self.write: AccessRecord | None = None
        self.readers: dict[ThreadId, AccessRecord] = {}


def make_clock_factory(shape: Shape, compress: bool) -> Callable[[], Clock]:
    if compress:
        return lambda: CompressedClock(shape)
    return lambda: DenseClock(shape)
