"""Exhaustive ground truth for predictable races on small traces.

Enumerates every correct reordering of a trace: an interleaving that
preserves per-thread order, mutual exclusion of overlapping-scope
critical sections, reads-from (every read sees the writer it saw in the
original trace, with no other write in between), and barriers as joint
transitions. A pair of conflicting accesses is a predictable race when
some correct reordering schedules them back to back. Suffixes of any
thread may be dropped, so races are collected at every reachable state.
"""

from __future__ import annotations

from dataclasses import dataclass

from .scopes import LockInstance, atomics_cover, scopes_overlap
from .trace import (
    ACQUIRE,
    BARRIER,
    READ,
    RELEASE,
    WRITE,
    Event,
    ThreadId,
    Trace,
    barrier_participants,
)


class OracleLimitError(ValueError):
    pass


@dataclass
class OracleResult:
    pairs: set[tuple[int, int]]  # sorted (event index, event index) pairs
    complete: bool
    states: int

    @property
    def raced(self) -> bool:
        return bool(self.pairs)


def _conflicting(a: Event, b: Event) -> bool:
    if not (a.is_access and b.is_access):
        return False
    if a.tid == b.tid or a.loc != b.loc:
        return False
    if a.kind != WRITE and b.kind != WRITE:
        return False
    assert a.tid is not None and b.tid is not None
    return not atomics_cover(a.atomic, a.scope, b.atomic, b.scope, a.tid, b.tid)


class _Search:
    def __init__(self, trace: Trace):
        self.events = trace.events
        self.participants = barrier_participants(trace)

        # Per-thread event sequences; barriers appear in every participant's
        # sequence as a joint transition.
        seqs: dict[ThreadId, list[int]] = {}
        for ev in trace.events:
            if ev.kind == BARRIER:
                for tid in self.participants[ev.index]:
                    seqs.setdefault(tid, []).append(ev.index)
            else:
                assert ev.tid is not None
                seqs.setdefault(ev.tid, []).append(ev.index)
        self.tids = sorted(seqs)
        self.seqs = [seqs[t] for t in self.tids]
        self.slot = {t: i for i, t in enumerate(self.tids)}

        # Original last writer for every read (None = initial value).
        self.reads_from: dict[int, int | None] = {}
        last_write: dict = {}
        for ev in trace.events:
            if ev.kind == READ:
                self.reads_from[ev.index] = last_write.get(ev.loc)
            elif ev.kind == WRITE:
                last_write[ev.loc] = ev.index

        self.locs = sorted({ev.loc for ev in trace.events if ev.loc is not None})
        self.loc_slot = {loc: i for i, loc in enumerate(self.locs)}

    def initial(self):
        cursors = tuple(0 for _ in self.tids)
        holders: tuple = ()  # (thread slot, LockInstance) pairs, sorted
        writers = tuple(None for _ in self.locs)
        return cursors, holders, writers

    def next_event(self, state, slot: int) -> Event | None:
        cursors = state[0]
        seq = self.seqs[slot]
        if cursors[slot] >= len(seq):
            return None
        return self.events[seq[cursors[slot]]]

    def enabled(self, state, slot: int, ev: Event) -> bool:
        cursors, holders, writers = state
        if ev.kind == ACQUIRE:
            assert ev.scope is not None and ev.lock is not None
            mine = LockInstance(ev.lock, ev.scope)
            return not any(
                h.lock == mine.lock and scopes_overlap(h, mine) for _, h in holders
            )
        if ev.kind == READ:
            return writers[self.loc_slot[ev.loc]] == self.reads_from[ev.index]
        if ev.kind == BARRIER:
            for tid in self.participants[ev.index]:
                s = self.slot[tid]
                seq = self.seqs[s]
                if cursors[s] >= len(seq) or seq[cursors[s]] != ev.index:
                    return False
            return True
        return True  # writes, releases, fences, ends

    def step(self, state, slot: int, ev: Event):
        cursors, holders, writers = state
        new_cursors = list(cursors)
        if ev.kind == BARRIER:
            for tid in self.participants[ev.index]:
                new_cursors[self.slot[tid]] += 1
        else:
            new_cursors[slot] += 1
        if ev.kind == ACQUIRE:
            assert ev.scope is not None and ev.lock is not None
            holders = tuple(
                sorted(holders + ((slot, LockInstance(ev.lock, ev.scope)),))
            )
        elif ev.kind == RELEASE:
            holders = tuple(
                (s, h) for s, h in holders if not (s == slot and h.lock == ev.lock)
            )
        elif ev.kind == WRITE:
            w = list(writers)
            w[self.loc_slot[ev.loc]] = ev.index
            writers = tuple(w)
        return tuple(new_cursors), holders, writers


def predictable_races(
    trace: Trace, limit: int = 20, budget: int = 10_000_000
) -> OracleResult:
    """All conflicting event pairs some correct reordering makes adjacent.

    Raises :class:`OracleLimitError` when the trace exceeds ``limit``
    events; returns a result flagged incomplete when the state budget is
    exhausted.
    """
    if len(trace.events) > limit:
        raise OracleLimitError(
            f"trace has {len(trace.events)} events, oracle limit is {limit}"
        )
    search = _Search(trace)
    pairs: set[tuple[int, int]] = set()
    start = search.initial()
    seen = {start}
    stack = [start]
    states = 0
    complete = True

    while stack:
        states += 1
        if states > budget:
            complete = False
            break
        state = stack.pop()
        n = len(search.tids)
        for slot in range(n):
            ev = search.next_event(state, slot)
            if ev is None or not search.enabled(state, slot, ev):
                continue
            succ = search.step(state, slot, ev)
            # A race is an adjacent schedule of two conflicting accesses:
            # ev now, then some other thread's next event, with nothing in
            # between.
            if ev.is_access:
                for other in range(n):
                    if other == slot:
                        continue
                    nxt = search.next_event(succ, other)
                    if (
                        nxt is not None
                        and _conflicting(ev, nxt)
                        and search.enabled(succ, other, nxt)
                    ):
                        pairs.add(
                            (min(ev.index, nxt.index), max(ev.index, nxt.index))
                        )
            if succ not in seen:
                seen.add(succ)
                stack.append(succ)

    return OracleResult(pairs=pairs, complete=complete, states=states)


def replayable(trace: Trace) -> bool:
    """Whether the trace is a correct reordering of itself (sanity)."""
    search = _Search(trace)
    state = search.initial()
    for ev in trace.events:
        if ev.kind == BARRIER:
            slot = search.slot[search.participants[ev.index][0]] if search.participants[ev.index] else 0
        else:
            assert ev.tid is not None
            slot = search.slot[ev.tid]
        nxt = search.next_event(state, slot)
        if nxt is None or nxt.index != ev.index or not search.enabled(state, slot, ev):
            return False
        state = search.step(state, slot, ev)
    return True
