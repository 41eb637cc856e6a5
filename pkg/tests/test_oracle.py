"""Reordering oracle, checked against an independent brute-force enumerator."""

import pytest

from gpurace.oracle import OracleLimitError, predictable_races, replayable
from gpurace.trace import ACQUIRE, DEVICE, READ, RELEASE, WRITE, parse_trace


def brute_force_pairs(trace):
    """All conflicting pairs adjacent in some interleaving prefix.

    Independent of the oracle: plain recursion over schedules with inline
    legality rules (program order, mutual exclusion with the device/
    same-block overlap rule, exact reads-from, barriers as joint steps of
    the threads live at the barrier's original position). Only suitable
    for tiny traces.
    """
    from gpurace.trace import barrier_participants

    events = trace.events
    participants = barrier_participants(trace)
    by_thread = {}
    for e in events:
        if e.kind == "barrier":
            for tid in participants[e.index]:
                by_thread.setdefault(tid, []).append(e.index)
        else:
            by_thread.setdefault(e.tid, []).append(e.index)
    threads = sorted(by_thread)

    reads_from = {}
    last = {}
    for e in events:
        if e.kind == READ:
            reads_from[e.index] = last.get(e.loc)
        elif e.kind == WRITE:
            last[e.loc] = e.index

    def overlap(a, b):
        # a, b are (scope kind, block) pairs
        if DEVICE in (a[0], b[0]):
            return True
        return a[1] == b[1]

    pairs = set()

    def conflicts(i, j):
        a, b = events[i], events[j]
        if not (a.is_access and b.is_access) or a.tid == b.tid or a.loc != b.loc:
            return False
        if a.kind != WRITE and b.kind != WRITE:
            return False
        if a.atomic and b.atomic:
            if DEVICE in (a.scope.kind, b.scope.kind) or a.tid.block == b.tid.block:
                return False
        return True

    def go(cursors, holders, writers, prev):
        for t in threads:
            pos = cursors[t]
            if pos >= len(by_thread[t]):
                continue
            i = by_thread[t][pos]
            e = events[i]
            if e.kind == "barrier":
                parts = participants[i]
                if t != min(parts):  # fire the joint step once, not per thread
                    continue
                if any(
                    cursors[u] >= len(by_thread[u]) or by_thread[u][cursors[u]] != i
                    for u in parts
                ):
                    continue
                nc = dict(cursors)
                for u in parts:
                    nc[u] += 1
                go(nc, holders, writers, i)
                continue
            if e.kind == ACQUIRE:
                if any(
                    h[0] == e.lock and overlap((h[1], h[2]), (e.scope.kind, e.scope.block))
                    for h in holders
                ):
                    continue
                nh = holders | {(e.lock, e.scope.kind, e.scope.block, t)}
                nw = writers
            elif e.kind == RELEASE:
                nh = frozenset(h for h in holders if not (h[0] == e.lock and h[3] == t))
                nw = writers
            elif e.kind == READ:
                if writers.get(e.loc) != reads_from[i]:
                    continue
                nh, nw = holders, writers
            elif e.kind == WRITE:
                nh = holders
                nw = dict(writers)
                nw[e.loc] = i
            else:
                nh, nw = holders, writers
            if prev is not None and conflicts(prev, i):
                pairs.add((min(prev, i), max(prev, i)))
            go({**cursors, t: pos + 1}, nh, nw, i)

    go({t: 0 for t in threads}, frozenset(), {}, None)
    return pairs


WCP_CLASSIC_7 = (
    "config blocks=2 warps=1 lanes=1\n"
    "0.0.0 wr g:0x10\n"
    "0.0.0 acq 0xa device\n"
    "0.0.0 wr g:0x14\n"
    "0.0.0 rel 0xa device\n"
    "1.0.0 acq 0xa device\n"
    "1.0.0 wr g:0x10\n"
    "1.0.0 wr g:0x14\n"
)


def test_wcp_classic_instance_matches_hand_enumeration():
    trace = parse_trace(WCP_CLASSIC_7)
    expected = brute_force_pairs(trace)
    assert expected == {(0, 5)}  # only the unprotected x writes can touch
    assert predictable_races(trace).pairs == expected


def test_two_unordered_writes_reported():
    trace = parse_trace(
        "config blocks=2 warps=1 lanes=1\n0.0.0 wr g:0x10\n1.0.0 wr g:0x10\n"
    )
    assert predictable_races(trace).pairs == {(0, 1)}


def test_write_read_pair_with_reads_from_is_a_race():
    trace = parse_trace(
        "config blocks=2 warps=1 lanes=1\n0.0.0 wr g:0x10\n1.0.0 rd g:0x10\n"
    )
    assert predictable_races(trace).pairs == {(0, 1)}


def test_read_pinned_to_second_writer_does_not_race_with_first():
    trace = parse_trace(
        "config blocks=2 warps=1 lanes=1\n"
        "0.0.0 wr g:0x10\n0.0.0 wr g:0x10\n1.0.0 rd g:0x10\n"
    )
    res = predictable_races(trace)
    assert (0, 2) not in res.pairs
    assert (1, 2) in res.pairs
    assert brute_force_pairs(trace) == res.pairs


def test_barrier_separated_writes_not_reported():
    trace = parse_trace(
        "config blocks=1 warps=2 lanes=1\n"
        "0.0.0 wr g:0x10\nbar block 0\n0.1.0 wr g:0x10\n"
    )
    assert predictable_races(trace).pairs == set()


def test_flag_ordering_through_reads_from_prevents_race():
    # The synchronized flag pair (device atomics) is no race itself, and
    # its reads-from edge pins the data writes apart in every reordering.
    trace = parse_trace(
        "config blocks=2 warps=1 lanes=1\n"
        "0.0.0 wr g:0x10\n"
        "0.0.0 wr g:0x20 atomic device\n"
        "1.0.0 rd g:0x20 atomic device\n"  # reads-from the flag write
        "1.0.0 wr g:0x10\n"
    )
    assert predictable_races(trace).pairs == set()
    assert brute_force_pairs(trace) == set()


def test_plain_flag_pair_is_itself_a_race():
    trace = parse_trace(
        "config blocks=2 warps=1 lanes=1\n"
        "0.0.0 wr g:0x10\n"
        "0.0.0 wr g:0x20\n"
        "1.0.0 rd g:0x20\n"
        "1.0.0 wr g:0x10\n"
    )
    res = predictable_races(trace)
    assert res.pairs == {(1, 2)}  # the unsynchronized flag itself
    assert brute_force_pairs(trace) == res.pairs


def test_mutual_exclusion_respected_for_overlapping_scopes_only():
    protected = (
        "config blocks=2 warps=1 lanes=1\n"
        "0.0.0 acq 0xa {s0}\n0.0.0 wr g:0x10\n0.0.0 rel 0xa {s0}\n"
        "1.0.0 acq 0xa {s1}\n1.0.0 wr g:0x10\n1.0.0 rel 0xa {s1}\n"
    )
    device = parse_trace(protected.format(s0="device", s1="device"))
    blocks = parse_trace(protected.format(s0="block", s1="block"))
    assert predictable_races(device).pairs == set()
    assert predictable_races(blocks).pairs == {(1, 4)}
    assert brute_force_pairs(device) == set()
    assert brute_force_pairs(blocks) == {(1, 4)}


def test_device_atomics_suppressed():
    trace = parse_trace(
        "config blocks=2 warps=1 lanes=1\n"
        "0.0.0 wr g:0x10 atomic device\n1.0.0 wr g:0x10 atomic device\n"
    )
    assert predictable_races(trace).pairs == set()


def test_original_trace_replays():
    trace = parse_trace(WCP_CLASSIC_7)
    assert replayable(trace)


def test_pairs_are_canonical_and_symmetric():
    trace = parse_trace(
        "config blocks=2 warps=1 lanes=1\n"
        "0.0.0 wr g:0x10\n1.0.0 rd g:0x10\n1.0.0 wr g:0x10\n"
    )
    pairs = predictable_races(trace).pairs
    assert all(i < j for i, j in pairs)


def test_limit_and_budget():
    trace = parse_trace(
        "config blocks=1 warps=1 lanes=1\n" + "0.0.0 wr g:0x10\n" * 25
    )
    with pytest.raises(OracleLimitError):
        predictable_races(trace, limit=20)
    res = predictable_races(trace, limit=30, budget=3)
    assert not res.complete


def test_random_traces_agree_with_brute_force():
    from gpurace.litmus import gen_random

    with_barriers = 0
    for seed in range(150):
        trace = gen_random(seed, blocks=2, warps=1, lanes=2, events=8)
        with_barriers += any(e.kind == "barrier" for e in trace.events)
        assert predictable_races(trace).pairs == brute_force_pairs(trace), seed
    assert with_barriers > 10  # the differential covers barrier semantics too


def test_barrier_litmus_agrees_with_brute_force():
    trace = parse_trace(
        "config blocks=1 warps=2 lanes=1\n"
        "0.0.0 wr g:0x10\n"
        "0.1.0 wr g:0x14\n"
        "bar block 0\n"
        "0.1.0 wr g:0x10\n"
        "0.0.0 wr g:0x14\n"
    )
    expected = brute_force_pairs(trace)
    assert expected == set()  # everything is barrier-separated or same-thread
    assert predictable_races(trace).pairs == expected

    trace = parse_trace(
        "config blocks=1 warps=2 lanes=2\n"
        "0.0.0 wr g:0x10\n"
        "bar warp 0 0 0x3\n"
        "0.1.0 wr g:0x10\n"  # different warp: not a participant
        "0.0.1 wr g:0x10\n"
    )
    expected = brute_force_pairs(trace)
    assert (0, 2) in expected and (0, 3) not in expected
    assert predictable_races(trace).pairs == expected
