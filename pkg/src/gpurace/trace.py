"""Event model and on-disk trace format for GPU kernel execution traces.

A trace is a totally ordered sequence of events (memory accesses, lock
acquires/releases, barriers, fences, thread exits) over a fixed thread
hierarchy of blocks / warps / lanes. Warp-coalesced access records are
expanded into per-lane events at parse time.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterator, NamedTuple

GLOBAL = "global"
SHARED = "shared"

BLOCK = "block"
DEVICE = "device"

READ = "read"
WRITE = "write"
ACQUIRE = "acquire"
RELEASE = "release"
BARRIER = "barrier"
FENCE = "fence"
END = "end"


class ThreadId(NamedTuple):
    block: int
    warp: int
    lane: int


def tid_str(tid: ThreadId) -> str:
    return f"{tid.block}.{tid.warp}.{tid.lane}"


class Scope(NamedTuple):
    """Visibility scope of a synchronization operation.

    SYSTEM-scoped input operations are collapsed to device scope at parse
    time; single-kernel traces cannot distinguish them.
    """

    kind: str  # BLOCK | DEVICE
    block: int | None = None  # set iff kind == BLOCK

    @staticmethod
    def device() -> "Scope":
        return Scope(DEVICE, None)

    @staticmethod
    def of_block(block: int) -> "Scope":
        return Scope(BLOCK, block)


class Location(NamedTuple):
    """An abstract memory location; shared locations are per-block."""

    space: str  # GLOBAL | SHARED
    block: int | None  # set iff space == SHARED
    addr: int


class Barrier(NamedTuple):
    scope: str  # BLOCK | "warp"
    block: int
    warp: int | None = None
    mask: int | None = None  # active-lane mask for warp barriers

    @property
    def is_warp(self) -> bool:
        return self.scope == "warp"


@dataclass(frozen=True)
class Event:
    index: int
    kind: str
    tid: ThreadId | None = None  # None for barriers (joint events)
    loc: Location | None = None
    atomic: bool = False
    scope: Scope | None = None  # atomic accesses, lock ops, fences
    instr: int | None = None
    lock: int | None = None
    barrier: Barrier | None = None
    group: int = -1  # shared by events expanded from one coalesced record

    @property
    def is_access(self) -> bool:
        return self.kind in (READ, WRITE)


@dataclass(frozen=True)
class TraceConfig:
    blocks: int
    warps: int  # warps per block
    lanes: int  # lanes per warp (warp size)

    @property
    def n_threads(self) -> int:
        return self.blocks * self.warps * self.lanes

    def thread_index(self, tid: ThreadId) -> int:
        return (tid.block * self.warps + tid.warp) * self.lanes + tid.lane

    def threads(self) -> Iterator[ThreadId]:
        for b in range(self.blocks):
            for w in range(self.warps):
                for l in range(self.lanes):
                    yield ThreadId(b, w, l)

    def block_threads(self, block: int) -> Iterator[ThreadId]:
        for w in range(self.warps):
            for l in range(self.lanes):
                yield ThreadId(block, w, l)

    def warp_threads(self, block: int, warp: int) -> Iterator[ThreadId]:
        for l in range(self.lanes):
            yield ThreadId(block, warp, l)


@dataclass
class Trace:
    config: TraceConfig
    events: list[Event] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.events)


@dataclass(frozen=True)
class Diagnostic:
    index: int  # event index the problem was detected at
    message: str

    def __str__(self) -> str:
        return f"event {self.index}: {self.message}"


class TraceParseError(ValueError):
    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------

_SCOPE_WORDS = {"block": BLOCK, "device": DEVICE, "system": DEVICE}


def _parse_int(tok: str, line_no: int, what: str, base: int = 10) -> int:
    try:
        if tok.lower().startswith(("0x", "0b", "0o")):
            return int(tok, 0)
        return int(tok, base)
    except ValueError:
        raise TraceParseError(line_no, f"bad {what}: {tok!r}") from None


def _parse_tid(tok: str, cfg: TraceConfig, line_no: int) -> ThreadId:
    parts = tok.split(".")
    if len(parts) != 3:
        raise TraceParseError(line_no, f"bad thread id: {tok!r}")
    b, w, l = (_parse_int(p, line_no, "thread index") for p in parts)
    if not (0 <= b < cfg.blocks):
        raise TraceParseError(line_no, f"block {b} out of range")
    if not (0 <= w < cfg.warps):
        raise TraceParseError(line_no, f"warp {w} out of range")
    if not (0 <= l < cfg.lanes):
        raise TraceParseError(line_no, f"lane {l} out of range (warp size {cfg.lanes})")
    return ThreadId(b, w, l)


def _parse_loc(tok: str, tid: ThreadId, line_no: int) -> Location:
    if len(tok) < 3 or tok[1] != ":" or tok[0] not in "gs":
        raise TraceParseError(line_no, f"bad location: {tok!r}")
    addr = _parse_int(tok[2:], line_no, "address", base=16)
    if tok[0] == "g":
        return Location(GLOBAL, None, addr)
    # Shared memory is private to the issuing thread's block.
    return Location(SHARED, tid.block, addr)


def _parse_scope_word(tok: str, tid: ThreadId | None, line_no: int) -> Scope:
    kind = _SCOPE_WORDS.get(tok)
    if kind is None:
        raise TraceParseError(line_no, f"bad scope: {tok!r}")
    if kind == BLOCK:
        if tid is None:
            raise TraceParseError(line_no, "block scope requires a thread")
        return Scope.of_block(tid.block)
    return Scope.device()


def _parse_access_tail(
    toks: list[str], tid: ThreadId, line_no: int
) -> tuple[bool, Scope | None, int | None]:
    """Parse the optional ``atomic <scope>`` and ``instr <n>`` suffix."""
    atomic = False
    scope: Scope | None = None
    instr: int | None = None
    i = 0
    while i < len(toks):
        if toks[i] == "atomic":
            if i + 1 >= len(toks):
                raise TraceParseError(line_no, "atomic requires a scope")
            atomic = True
            scope = _parse_scope_word(toks[i + 1], tid, line_no)
            i += 2
        elif toks[i] == "instr":
            if i + 1 >= len(toks):
                raise TraceParseError(line_no, "instr requires a number")
            instr = _parse_int(toks[i + 1], line_no, "instruction id")
            if instr < 0:
                raise TraceParseError(line_no, "instruction id must be nonnegative")
            i += 2
        else:
            raise TraceParseError(line_no, f"unexpected token {toks[i]!r}")
    return atomic, scope, instr


def parse_trace(text: str) -> Trace:
    """Parse trace text into a Trace with all warp records expanded.

    Coalesced ``wacc`` records become one READ/WRITE event per set mask
    bit, in lane order, all carrying the record's instruction id.
    """
    cfg: TraceConfig | None = None
    events: list[Event] = []
    group = 0

    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        toks = line.split()

        if cfg is None:
            if toks[0] != "config":
                raise TraceParseError(line_no, "first line must be a config line")
            vals: dict[str, int] = {}
            for tok in toks[1:]:
                if "=" not in tok:
                    raise TraceParseError(line_no, f"bad config entry {tok!r}")
                key, val = tok.split("=", 1)
                vals[key] = _parse_int(val, line_no, key)
            try:
                cfg = TraceConfig(vals["blocks"], vals["warps"], vals["lanes"])
            except KeyError as e:
                raise TraceParseError(line_no, f"config missing {e.args[0]}") from None
            if cfg.blocks < 1 or cfg.warps < 1 or cfg.lanes < 1:
                raise TraceParseError(line_no, "config values must be positive")
            continue

        if toks[0] == "config":
            raise TraceParseError(line_no, "duplicate config line")

        if toks[0] == "bar":
            if len(toks) >= 3 and toks[1] == "block":
                b = _parse_int(toks[2], line_no, "block")
                if not (0 <= b < cfg.blocks):
                    raise TraceParseError(line_no, f"block {b} out of range")
                if len(toks) > 3:
                    raise TraceParseError(line_no, "trailing tokens on barrier")
                events.append(
                    Event(len(events), BARRIER, barrier=Barrier(BLOCK, b), group=group)
                )
            elif len(toks) == 5 and toks[1] == "warp":
                b = _parse_int(toks[2], line_no, "block")
                w = _parse_int(toks[3], line_no, "warp")
                mask = _parse_int(toks[4], line_no, "mask", base=16)
                if not (0 <= b < cfg.blocks) or not (0 <= w < cfg.warps):
                    raise TraceParseError(line_no, "barrier block/warp out of range")
                if mask <= 0 or mask >= (1 << cfg.lanes):
                    raise TraceParseError(line_no, f"mask {mask:#x} out of range")
                events.append(
                    Event(
                        len(events),
                        BARRIER,
                        barrier=Barrier("warp", b, w, mask),
                        group=group,
                    )
                )
            else:
                raise TraceParseError(line_no, "bad barrier line")
            group += 1
            continue

        if toks[0] == "wacc":
            if len(toks) < 5:
                raise TraceParseError(line_no, "bad wacc line")
            b = _parse_int(toks[1], line_no, "block")
            w = _parse_int(toks[2], line_no, "warp")
            mask = _parse_int(toks[3], line_no, "mask", base=16)
            if not (0 <= b < cfg.blocks) or not (0 <= w < cfg.warps):
                raise TraceParseError(line_no, "wacc block/warp out of range")
            if mask <= 0 or mask >= (1 << cfg.lanes):
                raise TraceParseError(line_no, f"mask {mask:#x} out of range")
            kind = {"rd": READ, "wr": WRITE}.get(toks[4])
            if kind is None:
                raise TraceParseError(line_no, f"bad access kind {toks[4]!r}")
            # Addresses may be comma- or space-separated, one per set bit.
            addr_toks: list[str] = []
            rest = toks[5:]
            while rest and rest[0] not in ("atomic", "instr"):
                addr_toks.extend(a for a in rest[0].split(",") if a)
                rest = rest[1:]
            lanes = [l for l in range(cfg.lanes) if mask & (1 << l)]
            if len(addr_toks) != len(lanes):
                raise TraceParseError(
                    line_no,
                    f"wacc has {len(addr_toks)} addresses for {len(lanes)} active lanes",
                )
            first_tid = ThreadId(b, w, lanes[0])
            atomic, scope, instr = _parse_access_tail(rest, first_tid, line_no)
            if instr is None:
                instr = line_no
            for lane, addr_tok in zip(lanes, addr_toks):
                tid = ThreadId(b, w, lane)
                events.append(
                    Event(
                        len(events),
                        kind,
                        tid=tid,
                        loc=_parse_loc(addr_tok, tid, line_no),
                        atomic=atomic,
                        scope=scope if atomic else None,
                        instr=instr,
                        group=group,
                    )
                )
            group += 1
            continue

        # Remaining forms start with a thread id.
        tid = _parse_tid(toks[0], cfg, line_no)
        op = toks[1] if len(toks) > 1 else ""
        if op in ("rd", "wr"):
            if len(toks) < 3:
                raise TraceParseError(line_no, "access needs a location")
            loc = _parse_loc(toks[2], tid, line_no)
            atomic, scope, instr = _parse_access_tail(toks[3:], tid, line_no)
            if instr is None:
                instr = line_no
            events.append(
                Event(
                    len(events),
                    READ if op == "rd" else WRITE,
                    tid=tid,
                    loc=loc,
                    atomic=atomic,
                    scope=scope if atomic else None,
                    instr=instr,
                    group=group,
                )
            )
        elif op in ("acq", "rel"):
            if len(toks) != 4:
                raise TraceParseError(line_no, "lock op needs a lock and a scope")
            lock = _parse_int(toks[2], line_no, "lock", base=16)
            scope = _parse_scope_word(toks[3], tid, line_no)
            events.append(
                Event(
                    len(events),
                    ACQUIRE if op == "acq" else RELEASE,
                    tid=tid,
                    lock=lock,
                    scope=scope,
                    group=group,
                )
            )
        elif op == "fence":
            if len(toks) != 3:
                raise TraceParseError(line_no, "fence needs a scope")
            events.append(
                Event(
                    len(events),
                    FENCE,
                    tid=tid,
                    scope=_parse_scope_word(toks[2], tid, line_no),
                    group=group,
                )
            )
        elif op == "end":
            if len(toks) != 2:
                raise TraceParseError(line_no, "trailing tokens on end")
            events.append(Event(len(events), END, tid=tid, group=group))
        else:
            raise TraceParseError(line_no, f"unknown event {op!r}")
        group += 1

    if cfg is None:
        raise TraceParseError(0, "empty trace (no config line)")
    return Trace(cfg, events)


# ---------------------------------------------------------------------------
# Writing
# ---------------------------------------------------------------------------


def _fmt_scope(scope: Scope) -> str:
    return "device" if scope.kind == DEVICE else "block"


def _fmt_loc(loc: Location) -> str:
    prefix = "g" if loc.space == GLOBAL else "s"
    return f"{prefix}:{loc.addr:#x}"


def format_trace(trace: Trace) -> str:
    """Write a trace in normalized form (explicit scopes and instr ids).

    Coalesced records are written back as ``wacc`` lines so that a parse
    of the output reproduces the event groups exactly.
    """
    cfg = trace.config
    lines = [f"config blocks={cfg.blocks} warps={cfg.warps} lanes={cfg.lanes}"]
    by_group: list[list[Event]] = []
    for ev in trace.events:
        if by_group and ev.group >= 0 and by_group[-1][0].group == ev.group:
            by_group[-1].append(ev)
        else:
            by_group.append([ev])
    for record in by_group:
        if len(record) > 1:
            lines.append(_fmt_wacc(record))
            continue
        ev = record[0]
        if ev.kind == BARRIER:
            bar = ev.barrier
            assert bar is not None
            if bar.is_warp:
                lines.append(f"bar warp {bar.block} {bar.warp} {bar.mask:#x}")
            else:
                lines.append(f"bar block {bar.block}")
            continue
        assert ev.tid is not None
        head = tid_str(ev.tid)
        if ev.kind in (READ, WRITE):
            assert ev.loc is not None
            parts = [head, "rd" if ev.kind == READ else "wr", _fmt_loc(ev.loc)]
            if ev.atomic:
                assert ev.scope is not None
                parts += ["atomic", _fmt_scope(ev.scope)]
            parts += ["instr", str(ev.instr)]
            lines.append(" ".join(parts))
        elif ev.kind in (ACQUIRE, RELEASE):
            assert ev.scope is not None
            op = "acq" if ev.kind == ACQUIRE else "rel"
            lines.append(f"{head} {op} {ev.lock:#x} {_fmt_scope(ev.scope)}")
        elif ev.kind == FENCE:
            assert ev.scope is not None
            lines.append(f"{head} fence {_fmt_scope(ev.scope)}")
        elif ev.kind == END:
            lines.append(f"{head} end")
        else:  # pragma: no cover - all kinds handled
            raise AssertionError(ev.kind)
    return "\n".join(lines) + "\n"


def _fmt_wacc(record: list[Event]) -> str:
    first = record[0]
    assert first.tid is not None and first.is_access
    mask = 0
    for ev in record:
        assert ev.tid is not None
        mask |= 1 << ev.tid.lane
    addrs = ",".join(_fmt_loc(ev.loc) for ev in record)  # type: ignore[arg-type]
    parts = [
        "wacc",
        str(first.tid.block),
        str(first.tid.warp),
        f"{mask:#x}",
        "rd" if first.kind == READ else "wr",
        addrs,
    ]
    if first.atomic:
        assert first.scope is not None
        parts += ["atomic", _fmt_scope(first.scope)]
    parts += ["instr", str(first.instr)]
    return " ".join(parts)


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------


def barrier_participants(trace: Trace) -> dict[int, tuple[ThreadId, ...]]:
    """Map each barrier event index to its participant threads.

    Block barriers cover all live (non-exited) threads of the block; warp
    barriers cover the live masked lanes.
    """
    cfg = trace.config
    exited: set[ThreadId] = set()
    out: dict[int, tuple[ThreadId, ...]] = {}
    for ev in trace.events:
        if ev.kind == END and ev.tid is not None:
            exited.add(ev.tid)
        elif ev.kind == BARRIER:
            bar = ev.barrier
            assert bar is not None
            if bar.is_warp:
                assert bar.warp is not None and bar.mask is not None
                pool = [
                    ThreadId(bar.block, bar.warp, l)
                    for l in range(cfg.lanes)
                    if bar.mask & (1 << l)
                ]
            else:
                pool = list(cfg.block_threads(bar.block))
            out[ev.index] = tuple(t for t in pool if t not in exited)
    return out


def validate_trace(trace: Trace) -> list[Diagnostic]:
    """Check trace invariants; returns one diagnostic per violation."""
    diags: list[Diagnostic] = []
    exited: set[ThreadId] = set()
    held: dict[ThreadId, list[int]] = {}  # lock stack per thread

    for ev in trace.events:
        if ev.kind == BARRIER:
            bar = ev.barrier
            assert bar is not None
            if bar.is_warp:
                assert bar.warp is not None and bar.mask is not None
                for l in range(trace.config.lanes):
                    if bar.mask & (1 << l) and ThreadId(bar.block, bar.warp, l) in exited:
                        diags.append(
                            Diagnostic(
                                ev.index,
                                f"barrier divergence: exited lane {l} in warp barrier mask",
                            )
                        )
            else:
                live = [t for t in trace.config.block_threads(bar.block) if t not in exited]
                if not live:
                    diags.append(
                        Diagnostic(
                            ev.index,
                            f"barrier divergence: no live threads in block {bar.block}",
                        )
                    )
            continue

        tid = ev.tid
        assert tid is not None
        if not (
            0 <= tid.block < trace.config.blocks
            and 0 <= tid.warp < trace.config.warps
            and 0 <= tid.lane < trace.config.lanes
        ):
            diags.append(
                Diagnostic(ev.index, f"thread {tid_str(tid)} outside the configured hierarchy")
            )
            continue
        if tid in exited:
            diags.append(Diagnostic(ev.index, f"event after end of thread {tid_str(tid)}"))
            continue
        if ev.is_access and ev.loc is not None and ev.loc.space == SHARED:
            if ev.loc.block != tid.block:
                diags.append(
                    Diagnostic(
                        ev.index,
                        f"shared location of block {ev.loc.block} used by thread {tid_str(tid)}",
                    )
                )
        if ev.kind == ACQUIRE:
            stack = held.setdefault(tid, [])
            if ev.lock in stack:
                diags.append(
                    Diagnostic(ev.index, f"reentrant acquire of lock {ev.lock:#x}")
                )
            else:
                stack.append(ev.lock)  # type: ignore[arg-type]
        elif ev.kind == RELEASE:
            stack = held.setdefault(tid, [])
            if ev.lock not in stack:
                diags.append(
                    Diagnostic(ev.index, f"release of unheld lock {ev.lock:#x}")
                )
            elif stack[-1] != ev.lock:
                diags.append(
                    Diagnostic(
                        ev.index, f"improperly nested release of lock {ev.lock:#x}"
                    )
                )
                stack.remove(ev.lock)  # type: ignore[arg-type]
            else:
                stack.pop()
        elif ev.kind == END:
            exited.add(tid)

    return diags


# ---------------------------------------------------------------------------
# Ad-hoc lock inference
# ---------------------------------------------------------------------------


def infer_locks(trace: Trace) -> tuple[Trace, list[Diagnostic]]:
    """Turn atomic-write/fence idioms into explicit lock operations.

    An atomic write immediately followed (in its thread) by a fence becomes
    an acquire of the written address; a fence immediately followed by an
    atomic write becomes a release. The inferred scope is device only when
    both halves are device-scoped, otherwise the issuing thread's block.
    The fence is consumed; the merged event sits at the atomic's position.
    """
    diags: list[Diagnostic] = []
    per_thread: dict[ThreadId, list[int]] = {}
    for ev in trace.events:
        if ev.tid is not None:
            per_thread.setdefault(ev.tid, []).append(ev.index)

    replaced: dict[int, Event] = {}
    dropped: set[int] = set()

    for tid, idxs in per_thread.items():
        held: set[int] = set()
        i = 0
        while i < len(idxs) - 1:
            a = trace.events[idxs[i]]
            b = trace.events[idxs[i + 1]]
            if a.kind == WRITE and a.atomic and b.kind == FENCE:
                assert a.loc is not None and a.scope is not None and b.scope is not None
                lock = a.loc.addr
                scope = (
                    Scope.device()
                    if a.scope.kind == DEVICE and b.scope.kind == DEVICE
                    else Scope.of_block(tid.block)
                )
                replaced[a.index] = Event(
                    a.index, ACQUIRE, tid=tid, lock=lock, scope=scope, group=a.group
                )
                dropped.add(b.index)
                held.add(lock)
                i += 2
                continue
            if a.kind == FENCE and b.kind == WRITE and b.atomic:
                assert b.loc is not None and a.scope is not None and b.scope is not None
                lock = b.loc.addr
                if lock not in held:
                    diags.append(
                        Diagnostic(
                            b.index,
                            f"release of lock {lock:#x} not held by {tid_str(tid)}; left uninferred",
                        )
                    )
                    i += 1
                    continue
                scope = (
                    Scope.device()
                    if a.scope.kind == DEVICE and b.scope.kind == DEVICE
                    else Scope.of_block(tid.block)
                )
                replaced[b.index] = Event(
                    b.index, RELEASE, tid=tid, lock=lock, scope=scope, group=b.group
                )
                dropped.add(a.index)
                held.discard(lock)
                i += 2
                continue
            i += 1

    events: list[Event] = []
    for ev in trace.events:
        if ev.index in dropped:
            continue
        ev = replaced.get(ev.index, ev)
        events.append(replace(ev, index=len(events)))
    return Trace(trace.config, events), diags
