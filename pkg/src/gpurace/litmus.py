"""Litmus corpus and randomized trace generator.

Each corpus entry reconstructs a synchronization pattern worth testing a
GPU race detector against and records the verdict each detector (and the
reordering oracle) is expected to produce on it. The random generator
emits small well-formed traces for property tests: valid executions,
non-nested locking, mutual exclusion respected.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from .scopes import LockInstance, scopes_overlap
from .trace import Trace, parse_trace, validate_trace


@dataclass(frozen=True)
class CorpusEntry:
    name: str
    text: str
    expected: dict[str, int]  # detector name / "oracle" -> 0 or 1
    note: str


_CORPUS: list[CorpusEntry] = [
    CorpusEntry(
        "wcp-classic",
        """\
config blocks=2 warps=1 lanes=1
0.0.0 wr g:0x10
0.0.0 acq 0xa device
0.0.0 wr g:0x14
0.0.0 rel 0xa device
1.0.0 acq 0xa device
1.0.0 wr g:0x10
1.0.0 wr g:0x14
1.0.0 rel 0xa device
""",
        {"gwcp": 1, "hb": 0, "lockset": 1, "oracle": 1},
        "Unprotected write before a critical section races with a write "
        "inside a later section on the same lock; the release-acquire edge "
        "hides it from happens-before but not from the predictive order.",
    ),
    CorpusEntry(
        "scoped-cs",
        """\
config blocks=1 warps=2 lanes=1
0.0.0 wr s:0x10
0.0.0 acq 0xa block
0.0.0 wr s:0x14
0.0.0 rel 0xa block
0.1.0 acq 0xa block
0.1.0 wr s:0x10
0.1.0 wr s:0x14
0.1.0 rel 0xa block
""",
        {"gwcp": 1, "hb": 0, "lockset": 1, "oracle": 1},
        "Same pattern with block-scoped locks within one block and shared "
        "memory; interwarp classification.",
    ),
    CorpusEntry(
        "flag-fence-hidden",
        """\
config blocks=2 warps=1 lanes=1
1.0.0 rd g:0x20 atomic device
0.0.0 wr g:0x10
0.0.0 fence device
0.0.0 wr g:0x20 atomic device
1.0.0 wr g:0x10
""",
        {"gwcp": 1, "hb": 1, "lockset": 0, "oracle": 1},
        "Flag publication with a fence: both racy accesses are unprotected, "
        "so the lockset baseline falls back to fence analysis and stays "
        "silent; the clock detectors report.",
    ),
    CorpusEntry(
        "insufficient-scope-cs",
        """\
config blocks=3 warps=1 lanes=1
0.0.0 wr g:0x10
0.0.0 acq 0xa device
0.0.0 wr g:0x14
0.0.0 rel 0xa device
1.0.0 acq 0xa device
1.0.0 wr g:0x14
1.0.0 rel 0xa device
1.0.0 acq 0xb block
1.0.0 rel 0xb block
2.0.0 acq 0xb block
2.0.0 rel 0xb block
2.0.0 wr g:0x10
""",
        {"gwcp": 1, "hb": 1, "lockset": 0, "oracle": 1},
        "The chain to the last thread passes through block-scoped sections "
        "of different blocks, which order nothing; both clock detectors "
        "keep the race visible while the lockset baseline omits analysis "
        "for the empty locksets (the acquire's fence silences its fallback).",
    ),
    CorpusEntry(
        "its-intrawarp",
        """\
config blocks=1 warps=1 lanes=2
0.0.0 wr s:0x10 instr 1
0.0.1 wr s:0x10 instr 2
""",
        {"gwcp": 1, "hb": 1, "lockset": 1, "oracle": 1},
        "Divergent branches of one warp write the same location on "
        "different instructions with no reconvergence; racy under "
        "independent thread scheduling.",
    ),
    CorpusEntry(
        "same-instruction-intrawarp",
        """\
config blocks=1 warps=1 lanes=2
wacc 0 0 0x3 wr g:0x10,g:0x10 instr 5
""",
        {"gwcp": 1, "hb": 1, "lockset": 1, "oracle": 1},
        "One coalesced record in which two active lanes write the same "
        "address.",
    ),
    CorpusEntry(
        "warp-lock",
        """\
config blocks=1 warps=2 lanes=2
bar warp 0 0 0x3
0.0.0 acq 0xa block
0.0.0 wr g:0x10
0.0.0 rel 0xa block
bar warp 0 0 0x3
bar warp 0 1 0x3
0.1.0 acq 0xa block
0.1.0 wr g:0x10
0.1.0 rel 0xa block
bar warp 0 1 0x3
""",
        {"gwcp": 0, "hb": 0, "lockset": 0, "oracle": 0},
        "Lane 0 takes one lock for its whole warp between warp barriers; "
        "race free, and every warp's clock stays uniform.",
    ),
    CorpusEntry(
        "fence-only-race",
        """\
config blocks=2 warps=1 lanes=1
0.0.0 wr g:0x10
0.0.0 fence device
1.0.0 wr g:0x10
""",
        {"gwcp": 1, "hb": 1, "lockset": 0, "oracle": 1},
        "Conflicting strong accesses separated only by a fence: a "
        "documented lockset-baseline miss.",
    ),
    CorpusEntry(
        "block-atomic-race",
        """\
config blocks=2 warps=1 lanes=1
0.0.0 wr g:0x10 atomic block instr 1
1.0.0 wr g:0x10 atomic block instr 2
""",
        {"gwcp": 1, "hb": 1, "lockset": 1, "oracle": 1},
        "Block-scoped atomics from different blocks do not cover each "
        "other: racy under every detector.",
    ),
    CorpusEntry(
        "device-atomic-norace",
        """\
config blocks=2 warps=1 lanes=1
0.0.0 wr g:0x10 atomic device instr 1
1.0.0 wr g:0x10 atomic device instr 2
""",
        {"gwcp": 0, "hb": 0, "lockset": 0, "oracle": 0},
        "Device-scoped atomics never race.",
    ),
    CorpusEntry(
        "barrier-separated",
        """\
config blocks=1 warps=2 lanes=1
0.0.0 wr g:0x10
bar block 0
0.1.0 wr g:0x10
""",
        {"gwcp": 0, "hb": 0, "lockset": 0, "oracle": 0},
        "Accesses separated by a block barrier can never race.",
    ),
    CorpusEntry(
        "early-conflict-cs",
        """\
config blocks=2 warps=1 lanes=1
0.0.0 acq 0xa device
0.0.0 wr g:0x10
0.0.0 wr g:0x14
0.0.0 rel 0xa device
1.0.0 acq 0xa device
1.0.0 wr g:0x14
1.0.0 rel 0xa device
1.0.0 wr g:0x10
""",
        {"gwcp": 0, "hb": 0, "lockset": 1, "oracle": 1},
        "Critical sections conflict early, so the predictive order covers "
        "the later unprotected access: a documented predictive miss that "
        "the lockset baseline catches.",
    ),
    CorpusEntry(
        "hb-composition-hidden",
        """\
config blocks=3 warps=1 lanes=1
0.0.0 wr g:0x10
0.0.0 fence device
0.0.0 acq 0xa device
0.0.0 wr g:0x14
0.0.0 rel 0xa device
1.0.0 acq 0xa device
1.0.0 wr g:0x14
1.0.0 rel 0xa device
1.0.0 acq 0xb device
1.0.0 rel 0xb device
2.0.0 acq 0xb device
2.0.0 rel 0xb device
2.0.0 wr g:0x10
""",
        {"gwcp": 0, "hb": 0, "lockset": 0, "oracle": 1},
        "Composition with happens-before hides the race: the conflicting "
        "first sections order the unprotected write into everything the "
        "second thread later releases. Only the oracle sees it.",
    ),
    CorpusEntry(
        "warp-barrier-separated",
        """\
config blocks=1 warps=1 lanes=2
0.0.0 wr g:0x10
bar warp 0 0 0x3
0.0.1 wr g:0x10
""",
        {"gwcp": 0, "hb": 0, "lockset": 1, "oracle": 0},
        "A warp barrier orders the lanes for the clock detectors; the "
        "lockset baseline only understands block barriers and raises a "
        "false alarm.",
    ),
    CorpusEntry(
        "warp-barrier-nonparticipant",
        """\
config blocks=1 warps=1 lanes=4
0.0.0 wr g:0x10
bar warp 0 0 0x3
0.0.2 wr g:0x10
""",
        {"gwcp": 1, "hb": 1, "lockset": 1, "oracle": 1},
        "A lane outside the warp-barrier mask is not ordered by it.",
    ),
    CorpusEntry(
        "device-lock-cross-block",
        """\
config blocks=2 warps=1 lanes=1
0.0.0 acq 0xa device
0.0.0 wr g:0x10
0.0.0 rel 0xa device
1.0.0 acq 0xa device
1.0.0 wr g:0x10
1.0.0 rel 0xa device
""",
        {"gwcp": 0, "hb": 0, "lockset": 0, "oracle": 0},
        "Device-scoped locking across blocks synchronizes correctly.",
    ),
    CorpusEntry(
        "block-lock-cross-block",
        """\
config blocks=2 warps=1 lanes=1
0.0.0 acq 0xa block
0.0.0 wr g:0x10
0.0.0 rel 0xa block
1.0.0 acq 0xa block
1.0.0 wr g:0x10
1.0.0 rel 0xa block
""",
        {"gwcp": 1, "hb": 1, "lockset": 1, "oracle": 1},
        "Block-scoped instances of one lock in different blocks give no "
        "mutual exclusion; everything reports the race.",
    ),
]

_BY_NAME = {e.name: e for e in _CORPUS}


def corpus_names() -> list[str]:
    return [e.name for e in _CORPUS]


def corpus_entry(name: str) -> CorpusEntry:
    entry = _BY_NAME.get(name)
    if entry is None:
        raise KeyError(f"unknown litmus trace {name!r}")
    return entry


def gen_litmus(name: str) -> Trace:
    """Return the named corpus trace, validated."""
    trace = parse_trace(corpus_entry(name).text)
    diags = validate_trace(trace)
    assert not diags, f"corpus trace {name} invalid: {diags}"
    return trace


# ---------------------------------------------------------------------------
# Random generator
# ---------------------------------------------------------------------------

_GLOBAL_ADDRS = [0x10, 0x14, 0x18]
_SHARED_ADDRS = [0x80, 0x84]
_LOCKS = [0xA, 0xB]


def gen_random(
    seed: int,
    *,
    blocks: int = 2,
    warps: int = 2,
    lanes: int = 2,
    events: int = 12,
    locks: int = 2,
    locations: int = 3,
) -> Trace:
    """Deterministic small random trace; a valid execution by construction.

    Threads hold at most one lock at a time, overlapping-scope critical
    sections never overlap in time, and exits happen lock-free, so the
    result always validates and replays.
    """
    rng = random.Random(seed)
    n_blocks = rng.randint(1, blocks)
    n_warps = rng.randint(1, warps)
    n_lanes = rng.randint(1, lanes)
    n_events = rng.randint(3, max(3, events))
    lock_pool = _LOCKS[: max(1, min(locks, len(_LOCKS)))]
    loc_pool: list[tuple[str, int]] = [("g", a) for a in _GLOBAL_ADDRS] + [
        ("s", a) for a in _SHARED_ADDRS
    ]
    loc_pool = loc_pool[: max(1, min(locations + 2, len(loc_pool)))]

    lines = [f"config blocks={n_blocks} warps={n_warps} lanes={n_lanes}"]
    tids = [
        (b, w, l)
        for b in range(n_blocks)
        for w in range(n_warps)
        for l in range(n_lanes)
    ]
    live = set(tids)
    held: dict[tuple[int, int, int], tuple[int, str]] = {}  # tid -> (lock, scope)
    instr = 1

    def holders_overlap(lock: int, scope_kind: str, block: int) -> bool:
        mine = LockInstance(
            lock,
            _scope_of(scope_kind, block),
        )
        for (hb, _, _), (hl, hs) in held.items():
            if hl != lock:
                continue
            if scopes_overlap(LockInstance(hl, _scope_of(hs, hb)), mine):
                return True
        return False

    emitted = 0
    while emitted < n_events and live:
        tid = rng.choice(sorted(live))
        b, w, l = tid
        roll = rng.random()
        if roll < 0.55:
            space, addr = rng.choice(loc_pool)
            kind = "wr" if rng.random() < 0.6 else "rd"
            parts = [f"{b}.{w}.{l}", kind, f"{space}:{addr:#x}"]
            # Atomics are generated as writes only (the CAS/exchange idiom):
            # an atomic flag read that happens to observe a covered atomic
            # write pins the reordering oracle without being a race itself,
            # which is outside the soundness contract. Polling-read patterns
            # are exercised deterministically by the litmus corpus.
            if kind == "wr" and rng.random() < 0.3:
                parts += ["atomic", rng.choice(["block", "device"])]
            parts += ["instr", str(instr)]
            instr += 1
            lines.append(" ".join(parts))
        elif roll < 0.70:
            if tid in held:
                lock, scope = held.pop(tid)
                lines.append(f"{b}.{w}.{l} rel {lock:#x} {scope}")
            else:
                lock = rng.choice(lock_pool)
                scope = rng.choice(["block", "device"])
                if holders_overlap(lock, scope, b):
                    continue
                held[tid] = (lock, scope)
                lines.append(f"{b}.{w}.{l} acq {lock:#x} {scope}")
        elif roll < 0.78:
            lines.append(f"{b}.{w}.{l} fence {rng.choice(['block', 'device'])}")
        elif roll < 0.85:
            bar_block = rng.choice(sorted({t[0] for t in live}))
            lines.append(f"bar block {bar_block}")
        elif roll < 0.92:
            pool = sorted({(t[0], t[1]) for t in live})
            bb, bw = rng.choice(pool)
            lanes_live = [t[2] for t in sorted(live) if t[0] == bb and t[1] == bw]
            mask = 0
            for lane in lanes_live:
                if rng.random() < 0.7:
                    mask |= 1 << lane
            if mask == 0:
                mask = 1 << lanes_live[0]
            lines.append(f"bar warp {bb} {bw} {mask:#x}")
        else:
            if tid not in held and len(live) > 1:
                live.discard(tid)
                lines.append(f"{b}.{w}.{l} end")
            else:
                continue
        emitted += 1

    # Close any open critical sections so the trace also replays cleanly
    # when reordered by the oracle.
    for tid in sorted(held):
        lock, scope = held[tid]
        b, w, l = tid
        lines.append(f"{b}.{w}.{l} rel {lock:#x} {scope}")

    return parse_trace("\n".join(lines) + "\n")


def _scope_of(kind: str, block: int):
    from .trace import Scope

    return Scope.of_block(block) if kind == "block" else Scope.device()
