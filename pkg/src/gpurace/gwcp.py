"""On-the-fly tracker for a predictive partial order over GPU traces.

Each thread carries two clocks: ``hb`` tracks the scoped happens-before
relation, ``pred`` the weaker predictive relation that orders critical
sections only through conflicting accesses. Release-to-acquire edges are
deferred through per-thread queues of critical-section records and only
strengthen ``pred`` once the acquiring side is already ordered past the
recorded acquire, which is what lets the detector flag races that the
observed interleaving happened to hide.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

from .report import RW, WR, WW, Endpoint, Reporter
from .scopes import LockInstance, atomics_cover, release_acquire_orders, scopes_overlap
from .state import AccessRecord, LocationState, make_clock_factory
from .trace import (
    WRITE,
    Diagnostic,
    Event,
    Location,
    ThreadId,
    TraceConfig,
    tid_str,
)
from .vclock import Clock, CompressedClock, Shape


@dataclass
class CSRecord:
    """One critical section as seen by other threads' queues.

    The acquire clock is the acquirer's predictive time at the acquire;
    the release clock (the releaser's hb clock) is filled in when the
    section closes. Records are shared by reference across queues.
    """

    acq_clock: Clock
    instance: LockInstance
    rel_clock: Clock | None = None


@dataclass
class Frame:
    """An open critical section on the holder's lock stack."""

    instance: LockInstance
    record: CSRecord
    reads: set[Location] = field(default_factory=set)
    writes: set[Location] = field(default_factory=set)


class ThreadState:
    __slots__ = ("tid", "local", "hb", "pred", "frames", "exited")

    def __init__(self, tid: ThreadId, make_clock):
        self.tid = tid
        self.local = 1
        self.hb: Clock = make_clock()
        self.hb.set(tid, 1)
        self.pred: Clock = make_clock()
        self.frames: list[Frame] = []
        self.exited = False


class LockState:
    """Per-lock instance clocks, queues, and per-location section clocks."""

    def __init__(self, share_queues: bool):
        self.instances: dict[LockInstance, tuple[Clock, Clock]] = {}  # (hb, pred)
        self.cs_read: dict[tuple[LockInstance, Location], Clock] = {}
        self.cs_write: dict[tuple[LockInstance, Location], Clock] = {}
        self.queues: dict[ThreadId, deque[CSRecord]] = {}
        self._share = share_queues
        self._shared: list[CSRecord] = []  # stands in for unmaterialized threads

    def materialize(self, tid: ThreadId) -> deque[CSRecord]:
        q = self.queues.get(tid)
        if q is None:
            q = deque(self._shared)
            self.queues[tid] = q
        return q

    def materialize_all(self, cfg: TraceConfig, exited: set[ThreadId]) -> None:
        for tid in cfg.threads():
            if tid not in exited:
                self.materialize(tid)

    def push(self, rec: CSRecord, pusher: ThreadId, exited: set[ThreadId]) -> None:
        for tid, q in self.queues.items():
            if tid != pusher and tid not in exited:
                q.append(rec)
        if self._share:
            self._shared.append(rec)

    def drop(self, tid: ThreadId) -> None:
        self.queues.pop(tid, None)


class GwcpDetector:
    """Predictive race detector; drive with :func:`gpurace.engine.run`."""

    name = "gwcp"

    def __init__(
        self,
        config: TraceConfig,
        *,
        compress: bool = True,
        inactive_opt: bool = True,
        forced_barriers: bool = False,
    ):
        self.config = config
        self.shape = Shape(config.blocks, config.warps, config.lanes)
        self._make_clock = make_clock_factory(self.shape, compress)
        self._compress = compress
        self._inactive_opt = inactive_opt
        self._forced = forced_barriers
        self.reporter = Reporter(self.name)
        self.diagnostics: list[Diagnostic] = []
        self._threads: dict[ThreadId, ThreadState] = {}
        self._locks: dict[int, LockState] = {}
        self._locs: dict[Location, LocationState] = {}
        self._exited: set[ThreadId] = set()

    # -- state access -------------------------------------------------------

    def _thread(self, tid: ThreadId) -> ThreadState:
        st = self._threads.get(tid)
        if st is None:
            st = ThreadState(tid, self._make_clock)
            self._threads[tid] = st
        return st

    def _lock(self, lock: int) -> LockState:
        ls = self._locks.get(lock)
        if ls is None:
            ls = LockState(share_queues=self._inactive_opt)
            if not self._inactive_opt:
                ls.materialize_all(self.config, self._exited)
            self._locks[lock] = ls
        return ls

    def _loc(self, loc: Location) -> LocationState:
        st = self._locs.get(loc)
        if st is None:
            st = LocationState()
            self._locs[loc] = st
        return st

    def _c_clock(self, t: ThreadState) -> Clock:
        c = t.pred.copy()
        c.set(t.tid, t.local)
        return c

    # -- event handlers -----------------------------------------------------

    def _drain(self, t: ThreadState, ls: LockState, current: LockInstance) -> None:
        # Applies the deferred release edges: once this thread's predictive
        # time covers a recorded acquire of an already-closed section, the
        # section's release clock is folded in (only for overlapping scopes).
        q = ls.materialize(t.tid)
        while q and q[0].rel_clock is not None:
            c = self._c_clock(t)
            if not q[0].acq_clock.leq(c):
                break
            rec = q.popleft()
            if scopes_overlap(rec.instance, current):
                assert rec.rel_clock is not None
                t.pred.join(rec.rel_clock)

    def on_acquire(self, ev: Event) -> None:
        assert ev.tid is not None and ev.lock is not None and ev.scope is not None
        t = self._thread(ev.tid)
        if any(f.instance.lock == ev.lock for f in t.frames):
            self.diagnostics.append(
                Diagnostic(ev.index, f"reentrant acquire of lock {ev.lock:#x}")
            )
            return
        current = LockInstance(ev.lock, ev.scope)
        ls = self._lock(ev.lock)
        self._drain(t, ls, current)
        for inst, (inst_hb, inst_pred) in ls.instances.items():
            if release_acquire_orders(inst.scope, current.scope):
                t.hb.join(inst_hb)
                t.pred.join(inst_pred)
        rec = CSRecord(acq_clock=self._c_clock(t), instance=current)
        t.frames.append(Frame(current, rec))
        ls.push(rec, t.tid, self._exited)

    def on_release(self, ev: Event) -> None:
        assert ev.tid is not None and ev.lock is not None
        t = self._thread(ev.tid)
        if not t.frames or t.frames[-1].instance.lock != ev.lock:
            self.diagnostics.append(
                Diagnostic(ev.index, f"release of unheld lock {ev.lock:#x}")
            )
            return
        frame = t.frames[-1]
        inst = frame.instance
        ls = self._lock(ev.lock)
        self._drain(t, ls, inst)
        for x in frame.reads:
            self._joined(ls.cs_read, (inst, x)).join(t.hb)
        for x in frame.writes:
            self._joined(ls.cs_write, (inst, x)).join(t.hb)
        clocks = ls.instances.get(inst)
        if clocks is None:
            clocks = (self._make_clock(), self._make_clock())
            ls.instances[inst] = clocks
        clocks[0].join(t.hb)
        clocks[1].join(t.pred)
        frame.record.rel_clock = t.hb.copy()
        t.frames.pop()
        t.local += 1
        t.hb.set(t.tid, t.local)

    def _joined(self, table: dict, key) -> Clock:
        c = table.get(key)
        if c is None:
            c = self._make_clock()
            table[key] = c
        return c

    def on_access(self, ev: Event) -> None:
        assert ev.tid is not None and ev.loc is not None
        t = self._thread(ev.tid)
        is_write = ev.kind == WRITE

        # Conflicting-section edges: an access inside a critical section is
        # ordered after every earlier overlapping-scope section on the same
        # lock that touched the same location.
        for frame in t.frames:
            ls = self._locks.get(frame.instance.lock)
            if ls is None:
                continue
            for inst in ls.instances:
                if not scopes_overlap(inst, frame.instance):
                    continue
                cw = ls.cs_write.get((inst, ev.loc))
                if cw is not None:
                    t.pred.join(cw)
                if is_write:
                    cr = ls.cs_read.get((inst, ev.loc))
                    if cr is not None:
                        t.pred.join(cr)

        st = self._loc(ev.loc)
        w = st.write
        if (
            w is not None
            and w.tid != t.tid
            and w.time > t.pred.get(w.tid)
            and not atomics_cover(w.atomic, w.scope, ev.atomic, ev.scope, w.tid, ev.tid)
        ):
            self.reporter.report(
                WW if is_write else WR, ev.loc, w.endpoint(), Endpoint.of(ev)
            )
        if is_write:
            for u, r in st.readers.items():
                if (
                    u != t.tid
                    and r.time > t.pred.get(u)
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
        for frame in t.frames:
            (frame.writes if is_write else frame.reads).add(ev.loc)

    def on_fence(self, ev: Event) -> None:
        # Fences order nothing by themselves; they only matter for lock
        # inference and the lockset baseline.
        pass

    def on_barrier(self, ev: Event, participants: tuple[ThreadId, ...]) -> None:
        states = [self._thread(u) for u in participants]
        if not states:
            return
        hj = self._make_clock()
        pj = self._make_clock()
        for s in states:
            hj.join(s.hb)
            pj.join(self._c_clock(s))
        if self._forced:
            # Equalize the participant submatrix one past the highest local
            # time; every participant leaves with an identical clock, which
            # compresses whole warps/blocks. Events covered per column are
            # unchanged: no participant has events between its old local
            # time and the new shared one.
            m = 1 + max(s.local for s in states)
            for s in states:
                s.hb = hj.copy()
                s.pred = pj.copy()
                for u in participants:
                    s.hb.set(u, m)
                    s.pred.set(u, m)
                if isinstance(s.hb, CompressedClock):
                    s.hb.recompress()
                    s.pred.recompress()  # type: ignore[union-attr]
                s.local = m
        else:
            for s in states:
                s.hb = hj.copy()
                s.local += 1
                s.hb.set(s.tid, s.local)
                s.pred = pj.copy()
                s.pred.set(s.tid, s.local)

    def on_end(self, ev: Event) -> None:
        assert ev.tid is not None
        t = self._thread(ev.tid)
        if t.frames:
            locks = ", ".join(f"{f.instance.lock:#x}" for f in t.frames)
            self.diagnostics.append(
                Diagnostic(
                    ev.index, f"thread {tid_str(ev.tid)} exited holding lock(s) {locks}"
                )
            )
            t.frames.clear()
        t.exited = True
        self._exited.add(ev.tid)
        for ls in self._locks.values():
            ls.drop(ev.tid)

    # -- introspection (order matrix, stats) ---------------------------------

    def local_time(self, tid: ThreadId) -> int:
        st = self._threads.get(tid)
        return st.local if st is not None else 1

    def check_clock_dense(self, tid: ThreadId) -> tuple[int, ...]:
        st = self._threads.get(tid)
        if st is None:
            st = self._thread(tid)
        c = self._c_clock(st)
        return c.dense()

    def live_thread_clocks(self) -> list[Clock]:
        out: list[Clock] = []
        for tid in sorted(self._threads):
            st = self._threads[tid]
            if not st.exited:
                out.append(st.hb)
                out.append(st.pred)
        return out
