"""Happens-before detector: scoped edges, misses, determinism."""

from gpurace.engine import run
from gpurace.hb import HbDetector
from gpurace.trace import parse_trace


def detect(text, **kw):
    trace = parse_trace(text)
    det = HbDetector(trace.config, **kw)
    return run(trace, det)


def test_release_acquire_chain_hides_predictable_race():
    res = detect(
        "config blocks=2 warps=1 lanes=1\n"
        "0.0.0 wr g:0x10\n0.0.0 acq 0xa device\n0.0.0 wr g:0x14\n0.0.0 rel 0xa device\n"
        "1.0.0 acq 0xa device\n1.0.0 wr g:0x10\n1.0.0 wr g:0x14\n1.0.0 rel 0xa device\n"
    )
    assert not res.raced


def test_fence_only_separation_still_races():
    res = detect(
        "config blocks=2 warps=1 lanes=1\n"
        "0.0.0 wr g:0x10\n0.0.0 fence device\n1.0.0 wr g:0x10\n"
    )
    assert res.raced


def test_divergent_intrawarp_writes_race():
    res = detect(
        "config blocks=1 warps=1 lanes=2\n"
        "0.0.0 wr s:0x10 instr 1\n0.0.1 wr s:0x10 instr 2\n"
    )
    assert res.raced
    assert res.reports[0].klass == "intrawarp"


def test_warp_barrier_orders_masked_lanes_only():
    res = detect(
        "config blocks=1 warps=1 lanes=4\n"
        "0.0.0 wr g:0x10\nbar warp 0 0 0x3\n0.0.1 wr g:0x10\n"
    )
    assert not res.raced
    res = detect(
        "config blocks=1 warps=1 lanes=4\n"
        "0.0.0 wr g:0x10\nbar warp 0 0 0x3\n0.0.2 wr g:0x10\n"
    )
    assert res.raced


def test_block_scoped_release_acquire_only_within_block():
    text = (
        "config blocks=2 warps=2 lanes=1\n"
        "0.0.0 wr g:0x10\n0.0.0 acq 0xa block\n0.0.0 rel 0xa block\n"
        "{b}.{w}.0 acq 0xa block\n{b}.{w}.0 wr g:0x10\n{b}.{w}.0 rel 0xa block\n"
    )
    same_block = detect(text.format(b=0, w=1))
    other_block = detect(text.format(b=1, w=0))
    assert not same_block.raced  # hb edge applies within the block
    assert other_block.raced  # no edge across blocks


def test_identical_runs_identical_reports():
    text = (
        "config blocks=2 warps=1 lanes=1\n"
        "0.0.0 wr g:0x10\n1.0.0 wr g:0x10\n1.0.0 rd g:0x10\n0.0.0 wr g:0x10\n"
    )
    a = [r.to_json() for r in detect(text).reports]
    b = [r.to_json() for r in detect(text).reports]
    assert a == b and a
