"""Race reports and report bookkeeping shared by the detectors."""

from __future__ import annotations

import json
from dataclasses import dataclass

from .trace import GLOBAL, Event, Location, ThreadId, tid_str

WW = "ww"
WR = "wr"  # prior write, current read
RW = "rw"  # prior read, current write

INTRAWARP = "intrawarp"
INTERWARP = "interwarp"
INTERBLOCK = "interblock"


def classify(a: ThreadId, b: ThreadId) -> str:
    if a.block != b.block:
        return INTERBLOCK
    if a.warp != b.warp:
        return INTERWARP
    return INTRAWARP


@dataclass(frozen=True)
class Endpoint:
    event: int
    tid: ThreadId
    instr: int

    @staticmethod
    def of(ev: Event) -> "Endpoint":
        assert ev.tid is not None and ev.instr is not None
        return Endpoint(ev.index, ev.tid, ev.instr)


@dataclass(frozen=True)
class RaceReport:
    detector: str
    kind: str  # ww | wr | rw
    loc: Location
    prior: Endpoint
    current: Endpoint
    confidence: str  # "first" | "post-race"

    @property
    def klass(self) -> str:
        return classify(self.prior.tid, self.current.tid)

    def to_dict(self) -> dict:
        loc: dict = {"space": self.loc.space}
        if self.loc.space != GLOBAL:
            loc["block"] = self.loc.block
        loc["addr"] = f"{self.loc.addr:#x}"
        return {
            "detector": self.detector,
            "kind": self.kind,
            "location": loc,
            "prior": {
                "event": self.prior.event,
                "tid": tid_str(self.prior.tid),
                "instr": self.prior.instr,
            },
            "current": {
                "event": self.current.event,
                "tid": tid_str(self.current.tid),
                "instr": self.current.instr,
            },
            "class": self.klass,
            "confidence": self.confidence,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), separators=(",", ":"))


class Reporter:
    """Collects reports, deduplicating per (location, instr pair).

    Only the first race at a given location between a given ordered pair
    of instructions is kept; the first report of a run is the one the
    soundness guarantee speaks for, so later ones are marked post-race.
    """

    def __init__(self, detector: str):
        self.detector = detector
        self.reports: list[RaceReport] = []
        self._seen: set[tuple[Location, int, int]] = set()

    def report(self, kind: str, loc: Location, prior: Endpoint, current: Endpoint) -> None:
        key = (loc, prior.instr, current.instr)
        if key in self._seen:
            return
        self._seen.add(key)
        confidence = "first" if not self.reports else "post-race"
        self.reports.append(
            RaceReport(self.detector, kind, loc, prior, current, confidence)
        )
