"""Event dispatch loop shared by all detectors.

Feeds trace events to a detector in order, runs the same-instruction
intrawarp write check on coalesced records, and (optionally) captures a
pairwise order matrix or per-event clock-compression statistics.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .report import WW, Endpoint, RaceReport
from .scopes import atomics_cover
from .trace import (
    ACQUIRE,
    BARRIER,
    END,
    FENCE,
    RELEASE,
    WRITE,
    Diagnostic,
    Event,
    ThreadId,
    Trace,
    barrier_participants,
)
from .vclock import CompressedClock


@dataclass
class RunResult:
    reports: list[RaceReport]
    diagnostics: list[Diagnostic]
    ordered_pairs: list[tuple[int, int]] | None = None
    n_events: int = 0
    stats: dict | None = None

    @property
    def raced(self) -> bool:
        return bool(self.reports)


@dataclass
class _StatsCollector:
    """Counters over live per-thread clocks, sampled after every event."""

    peak_entries: int = 0
    series: list[tuple[int, int, int, int, int]] = field(default_factory=list)

    def snapshot(self, detector) -> None:
        cb = eb = cw = ew = entries = 0
        for clock in detector.live_thread_clocks():
            if not isinstance(clock, CompressedClock):
                raise ValueError("stats require compressed clocks")
            b_c, b_e, w_c, w_e, n = clock.rep_counts()
            cb += b_c
            eb += b_e
            cw += w_c
            ew += w_e
            entries += n
        self.peak_entries = max(self.peak_entries, entries)
        self.series.append((cb, eb, cw, ew, entries))

    def summary(self, n_events: int) -> dict:
        last = self.series[-1] if self.series else (0, 0, 0, 0, 0)
        keys = (
            "blocks_compressed",
            "blocks_expanded",
            "warps_compressed",
            "warps_expanded",
            "entries",
        )
        return {
            "events": n_events,
            "final": dict(zip(keys, last)),
            "peak_entries": self.peak_entries,
            "per_event": [list(row) for row in self.series],
        }


def _same_instruction_check(detector, record: list[Event]) -> None:
    # Two active lanes of one coalesced record writing one location race
    # even though their clocks may cover each other (e.g. right after a warp
    # barrier); every detector reports these.
    if record[0].kind != WRITE:
        return
    for i, a in enumerate(record):
        for b in record[i + 1 :]:
            if a.loc != b.loc or a.tid == b.tid:
                continue
            assert a.tid is not None and b.tid is not None
            if atomics_cover(a.atomic, a.scope, b.atomic, b.scope, a.tid, b.tid):
                continue
            assert a.loc is not None
            detector.reporter.report(WW, a.loc, Endpoint.of(a), Endpoint.of(b))


def run(
    trace: Trace,
    detector,
    *,
    order_matrix: bool = False,
    collect_stats: bool = False,
) -> RunResult:
    """Process all events of the trace through the detector."""
    participants = barrier_participants(trace)
    stats = _StatsCollector() if collect_stats else None
    stamps: list[tuple[ThreadId, int] | None] = []
    rows: list[tuple[int, ...] | None] = []

    records: list[list[Event]] = []
    for ev in trace.events:
        # Negative group ids mark ungrouped events; only parser-assigned
        # groups coalesce.
        if records and ev.group >= 0 and records[-1][0].group == ev.group:
            records[-1].append(ev)
        else:
            records.append([ev])
    for record in records:
        if len(record) > 1:
            _same_instruction_check(detector, record)
        for ev in record:
            if order_matrix and ev.tid is not None:
                stamps.append((ev.tid, detector.local_time(ev.tid)))
            else:
                stamps.append(None)
            if ev.is_access:
                detector.on_access(ev)
            elif ev.kind == ACQUIRE:
                detector.on_acquire(ev)
            elif ev.kind == RELEASE:
                detector.on_release(ev)
            elif ev.kind == FENCE:
                detector.on_fence(ev)
            elif ev.kind == BARRIER:
                detector.on_barrier(ev, participants[ev.index])
            elif ev.kind == END:
                detector.on_end(ev)
            if order_matrix and ev.tid is not None:
                rows.append(detector.check_clock_dense(ev.tid))
            else:
                rows.append(None)
            if stats is not None:
                stats.snapshot(detector)

    result = RunResult(
        reports=list(detector.reporter.reports),
        diagnostics=list(detector.diagnostics),
        n_events=len(trace.events),
    )
    if order_matrix:
        result.ordered_pairs = _ordered_pairs(trace, stamps, rows)
    if stats is not None:
        result.stats = stats.summary(len(trace.events))
    return result


def _ordered_pairs(
    trace: Trace,
    stamps: list[tuple[ThreadId, int] | None],
    rows: list[tuple[int, ...] | None],
) -> list[tuple[int, int]]:
    """Pairs (i, j) with i before j in the trace and i ordered before j
    under the detector's relation. Barrier events are excluded."""
    shape_index = trace.config.thread_index
    pairs: list[tuple[int, int]] = []
    for j, row in enumerate(rows):
        if row is None:
            continue
        tid_j = stamps[j][0]  # type: ignore[index]
        for i in range(j):
            st = stamps[i]
            if st is None:
                continue
            tid_i, time_i = st
            if tid_i == tid_j or row[shape_index(tid_i)] >= time_i:
                pairs.append((i, j))
    return pairs
