"""Scoped-lockset baseline detector.

A deliberately simple approximation of hardware lockset checkers: two
conflicting accesses race unless a common block barrier separates them,
their scoped locksets share an overlapping instance, or (when neither
side held a lock) the prior accessor fenced at a covering scope in
between. Lock acquires and releases count as fences, since the ad-hoc
lock idiom implements them with an atomic plus a fence.
"""

from __future__ import annotations

from .report import RW, WR, WW, Endpoint, Reporter
from .scopes import LockInstance, atomics_cover, scopes_overlap
from .state import AccessRecord
from .trace import (
    DEVICE,
    WRITE,
    Diagnostic,
    Event,
    Location,
    ThreadId,
    TraceConfig,
    tid_str,
)


class _Access:
    __slots__ = ("rec", "lockset", "epoch")

    def __init__(self, rec: AccessRecord, lockset: frozenset[LockInstance], epoch: int):
        self.rec = rec
        self.lockset = lockset
        self.epoch = epoch  # block-barrier epoch of the accessor's block


class _Thread:
    __slots__ = ("held", "last_device_fence", "last_block_fence", "exited")

    def __init__(self):
        self.held: set[LockInstance] = set()
        self.last_device_fence = -1  # event index of the latest covering fence
        self.last_block_fence = -1
        self.exited = False


class _LocMeta:
    __slots__ = ("write", "readers")

    def __init__(self):
        self.write: _Access | None = None
        self.readers: dict[ThreadId, _Access] = {}


class LocksetDetector:
    name = "lockset"

    def __init__(self, config: TraceConfig, *, warp_granularity: bool = False):
        self.config = config
        self._warp_granularity = warp_granularity
        self.reporter = Reporter(self.name)
        self.diagnostics: list[Diagnostic] = []
        self._threads: dict[ThreadId, _Thread] = {}
        self._locs: dict[Location, _LocMeta] = {}
        self._epochs: dict[int, int] = {}  # block -> barrier count

    def _thread(self, tid: ThreadId) -> _Thread:
        st = self._threads.get(tid)
        if st is None:
            st = _Thread()
            self._threads[tid] = st
        return st

    def _identity(self, tid: ThreadId):
        if self._warp_granularity:
            return (tid.block, tid.warp)
        return tid

    def _races(self, prior: _Access, ev: Event, now: _Thread) -> bool:
        p = prior.rec
        assert ev.tid is not None
        if self._identity(p.tid) == self._identity(ev.tid):
            return False
        if p.tid.block == ev.tid.block and self._epochs.get(p.tid.block, 0) > prior.epoch:
            return False  # a block barrier ordered them
        if atomics_cover(p.atomic, p.scope, ev.atomic, ev.scope, p.tid, ev.tid):
            return False
        cur_lockset = frozenset(now.held)
        if prior.lockset or cur_lockset:
            for a in prior.lockset:
                for b in cur_lockset:
                    if a.lock == b.lock and scopes_overlap(a, b):
                        return False
            return True
        # Neither side held a lock: fall back to fence analysis.
        prior_thread = self._threads.get(p.tid)
        if prior_thread is not None:
            if prior_thread.last_device_fence > p.event:
                return False
            if (
                p.tid.block == ev.tid.block
                and prior_thread.last_block_fence > p.event
            ):
                return False
        return True

    def on_access(self, ev: Event) -> None:
        assert ev.tid is not None and ev.loc is not None and ev.instr is not None
        t = self._thread(ev.tid)
        is_write = ev.kind == WRITE
        meta = self._locs.get(ev.loc)
        if meta is None:
            meta = _LocMeta()
            self._locs[ev.loc] = meta

        w = meta.write
        if w is not None and self._races(w, ev, t):
            self.reporter.report(
                WW if is_write else WR, ev.loc, w.rec.endpoint(), Endpoint.of(ev)
            )
        if is_write:
            for u, r in meta.readers.items():
                if u != ev.tid and self._races(r, ev, t):
                    self.reporter.report(RW, ev.loc, r.rec.endpoint(), Endpoint.of(ev))

        rec = AccessRecord(0, ev.tid, ev.atomic, ev.scope, ev.instr, ev.index)
        acc = _Access(rec, frozenset(t.held), self._epochs.get(ev.tid.block, 0))
        if is_write:
            meta.write = acc
            meta.readers.clear()
        else:
            meta.readers[ev.tid] = acc

    def _fence_at(self, t: _Thread, scope, index: int) -> None:
        if scope.kind == DEVICE:
            t.last_device_fence = index
        else:
            t.last_block_fence = index

    def on_acquire(self, ev: Event) -> None:
        assert ev.tid is not None and ev.lock is not None and ev.scope is not None
        t = self._thread(ev.tid)
        inst = LockInstance(ev.lock, ev.scope)
        if any(i.lock == ev.lock for i in t.held):
            self.diagnostics.append(
                Diagnostic(ev.index, f"reentrant acquire of lock {ev.lock:#x}")
            )
            return
        t.held.add(inst)
        self._fence_at(t, ev.scope, ev.index)

    def on_release(self, ev: Event) -> None:
        assert ev.tid is not None and ev.lock is not None
        t = self._thread(ev.tid)
        inst = next((i for i in t.held if i.lock == ev.lock), None)
        if inst is None:
            self.diagnostics.append(
                Diagnostic(ev.index, f"release of unheld lock {ev.lock:#x}")
            )
            return
        t.held.discard(inst)
        assert ev.scope is not None
        self._fence_at(t, ev.scope, ev.index)

    def on_fence(self, ev: Event) -> None:
        assert ev.tid is not None and ev.scope is not None
        self._fence_at(self._thread(ev.tid), ev.scope, ev.index)

    def on_barrier(self, ev: Event, participants: tuple[ThreadId, ...]) -> None:
        bar = ev.barrier
        assert bar is not None
        if not bar.is_warp:
            self._epochs[bar.block] = self._epochs.get(bar.block, 0) + 1

    def on_end(self, ev: Event) -> None:
        assert ev.tid is not None
        t = self._thread(ev.tid)
        if t.held:
            locks = ", ".join(f"{i.lock:#x}" for i in sorted(t.held))
            self.diagnostics.append(
                Diagnostic(
                    ev.index, f"thread {tid_str(ev.tid)} exited holding lock(s) {locks}"
                )
            )
            t.held.clear()
        t.exited = True
