"""Scoped happens-before race detector.

Tracks only the happens-before clock per thread: release-to-acquire edges
(subject to the scope rule), barrier joins, and per-thread order. Unlike
the predictive detector it has no queues or conflicting-section clocks,
so every release it can see orders everything before it.
"""

from __future__ import annotations

from .report import RW, WR, WW, Endpoint, Reporter
from .scopes import LockInstance, atomics_cover, release_acquire_orders
from .state import AccessRecord, LocationState, make_clock_factory
from .trace import WRITE, Diagnostic, Event, Location, ThreadId, TraceConfig, tid_str
from .vclock import Clock, CompressedClock, Shape


class _Thread:
    __slots__ = ("tid", "local", "hb", "held", "exited")

    def __init__(self, tid: ThreadId, make_clock):
        self.tid = tid
        self.local = 1
        self.hb: Clock = make_clock()
        self.hb.set(tid, 1)
        self.held: list[LockInstance] = []
        self.exited = False


class HbDetector:
    name = "hb"

    def __init__(
        self,
        config: TraceConfig,
        *,
        compress: bool = True,
        forced_barriers: bool = False,
    ):
        self.config = config
        self.shape = Shape(config.blocks, config.warps, config.lanes)
        self._make_clock = make_clock_factory(self.shape, compress)
        self._forced = forced_barriers
        self.reporter = Reporter(self.name)
        self.diagnostics: list[Diagnostic] = []
        self._threads: dict[ThreadId, _Thread] = {}
        self._locks: dict[int, dict[LockInstance, Clock]] = {}
        self._locs: dict[Location, LocationState] = {}

    def _thread(self, tid: ThreadId) -> _Thread:
        st = self._threads.get(tid)
        if st is None:
            st = _Thread(tid, self._make_clock)
            self._threads[tid] = st
        return st

    def _loc(self, loc: Location) -> LocationState:
        st = self._locs.get(loc)
        if st is None:
            st = LocationState()
            self._locs[loc] = st
        return st

    def on_acquire(self, ev: Event) -> None:
        assert ev.tid is not None and ev.lock is not None and ev.scope is not None
        t = self._thread(ev.tid)
        if any(i.lock == ev.lock for i in t.held):
            self.diagnostics.append(
                Diagnostic(ev.index, f"reentrant acquire of lock {ev.lock:#x}")
            )
            return
        current = LockInstance(ev.lock, ev.scope)
        for inst, clock in self._locks.get(ev.lock, {}).items():
            if release_acquire_orders(inst.scope, current.scope):
                t.hb.join(clock)
        t.held.append(current)

    def on_release(self, ev: Event) -> None:
        assert ev.tid is not None and ev.lock is not None
        t = self._thread(ev.tid)
        if not t.held or t.held[-1].lock != ev.lock:
            self.diagnostics.append(
                Diagnostic(ev.index, f"release of unheld lock {ev.lock:#x}")
            )
            return
        inst = t.held.pop()
        table = self._locks.setdefault(ev.lock, {})
        clock = table.get(inst)
        if clock is None:
            clock = self._make_clock()
            table[inst] = clock
        clock.join(t.hb)
        t.local += 1
        t.hb.set(t.tid, t.local)

    def on_access(self, ev: Event) -> None:
        assert ev.tid is not None and ev.loc is not None
        t = self._thread(ev.tid)
        is_write = ev.kind == WRITE
        st = self._loc(ev.loc)
        w = st.write
        if (
            w is not None
            and w.tid != t.tid
            and w.time > t.hb.get(w.tid)
            and not atomics_cover(w.atomic, w.scope, ev.atomic, ev.scope, w.tid, ev.tid)
        ):
            self.reporter.report(
                WW if is_write else WR, ev.loc, w.endpoint(), Endpoint.of(ev)
            )
        if is_write:
            for u, r in st.readers.items():
                if (
                    u != t.tid
                    and r.time > t.hb.get(u)
                    and not atomics_cover(r.atomic, r.scope, ev.atomic, ev.scope, u, ev.tid)
                ):
                    self.reporter.report(RW, ev.loc, r.endpoint(), Endpoint.of(ev))
        assert ev.instr is not None
        rec = AccessRecord(t.local, t.tid, ev.atomic, ev.scope, ev.instr, ev.index)
        if is_write:
            st.write = rec
            st.readers.clear()
        else:
            st.readers[t.tid] = rec

    def on_fence(self, ev: Event) -> None:
        pass

    def on_barrier(self, ev: Event, participants: tuple[ThreadId, ...]) -> None:
        states = [self._thread(u) for u in participants]
        if not states:
            return
        hj = self._make_clock()
        for s in states:
            hj.join(s.hb)
        if self._forced:
            m = 1 + max(s.local for s in states)
            for s in states:
                s.hb = hj.copy()
                for u in participants:
                    s.hb.set(u, m)
                if isinstance(s.hb, CompressedClock):
                    s.hb.recompress()
                s.local = m
        else:
            for s in states:
                s.hb = hj.copy()
                s.local += 1
                s.hb.set(s.tid, s.local)

    def on_end(self, ev: Event) -> None:
        assert ev.tid is not None
        t = self._thread(ev.tid)
        if t.held:
            locks = ", ".join(f"{i.lock:#x}" for i in t.held)
            self.diagnostics.append(
                Diagnostic(
                    ev.index, f"thread {tid_str(ev.tid)} exited holding lock(s) {locks}"
                )
            )
            t.held.clear()
        t.exited = True

    def local_time(self, tid: ThreadId) -> int:
        st = self._threads.get(tid)
        return st.local if st is not None else 1

    def check_clock_dense(self, tid: ThreadId) -> tuple[int, ...]:
        return self._thread(tid).hb.dense()

    def live_thread_clocks(self) -> list[Clock]:
        return [
            self._threads[tid].hb
            for tid in sorted(self._threads)
            if not self._threads[tid].exited
        ]
