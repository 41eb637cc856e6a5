"""Vector clocks, epochs, and a hierarchical compressed per-thread clock.

The compressed form mirrors the block -> warp -> lane thread hierarchy:
each block-level clock is either a single value shared by every thread of
the block or an array of warp-level clocks, and each warp-level clock is
either a single shared value or a map from lane to its (nonzero) time.
Every operation preserves the correspondence with a dense clock.
"""

from __future__ import annotations

from typing import Iterable, NamedTuple, Protocol

from .trace import ThreadId


class Shape(NamedTuple):
    blocks: int
    warps: int
    lanes: int

    def index(self, tid: ThreadId) -> int:
        return (tid.block * self.warps + tid.warp) * self.lanes + tid.lane

    @property
    def width(self) -> int:
        return self.blocks * self.warps * self.lanes


class Epoch(NamedTuple):
    """Logical time of a single thread; a one-entry vector clock."""

    time: int
    tid: ThreadId


def epoch_leq(epoch: Epoch | None, clock: "Clock") -> bool:
    """True iff the epoch is unset or covered by the clock."""
    return epoch is None or epoch.time <= clock.get(epoch.tid)


class Clock(Protocol):
    shape: Shape

    def get(self, tid: ThreadId) -> int: ...
    def set(self, tid: ThreadId, value: int) -> None: ...
    def join(self, other: "Clock") -> None: ...
    def leq(self, other: "Clock") -> bool: ...
    def copy(self) -> "Clock": ...
    def dense(self) -> tuple[int, ...]: ...


class DenseClock:
    """Reference vector clock: one stored entry per thread."""

    __slots__ = ("shape", "_v")

    def __init__(self, shape: Shape, values: list[int] | None = None):
        self.shape = shape
        self._v = values if values is not None else [0] * shape.width

    def get(self, tid: ThreadId) -> int:
        return self._v[self.shape.index(tid)]

    def set(self, tid: ThreadId, value: int) -> None:
        self._v[self.shape.index(tid)] = value

    def join(self, other: Clock) -> None:
        if self.shape != other.shape:
            raise ValueError("clock shape mismatch")
        theirs = other.dense()
        v = self._v
        for i, t in enumerate(theirs):
            if t > v[i]:
                v[i] = t

    def leq(self, other: Clock) -> bool:
        if self.shape != other.shape:
            raise ValueError("clock shape mismatch")
        theirs = other.dense()
        return all(a <= b for a, b in zip(self._v, theirs))

    def copy(self) -> "DenseClock":
        return DenseClock(self.shape, list(self._v))

    def dense(self) -> tuple[int, ...]:
        return tuple(self._v)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, DenseClock) and self._v == other._v

    def __repr__(self) -> str:
        return f"DenseClock({self._v})"


class CompressedClock:
    """Hierarchically compressed per-thread vector clock.

    A block entry is an int (every thread of the block shares that time)
    or a list of warp entries; a warp entry is an int or a map from lane
    to its nonzero time.
    """

    __slots__ = ("shape", "_blocks")

    def __init__(self, shape: Shape):
        self.shape = shape
        self._blocks: list = [0] * shape.blocks

    def get(self, tid: ThreadId) -> int:
        blk = self._blocks[tid.block]
        if isinstance(blk, int):
            return blk
        wrp = blk[tid.warp]
        if isinstance(wrp, int):
            return wrp
        return wrp.get(tid.lane, 0)

    def set(self, tid: ThreadId, value: int) -> None:
        # Lazy minimal expansion: only the path to the touched warp opens up.
        blk = self._blocks[tid.block]
        if isinstance(blk, int):
            if blk == value:
                return
            blk = [blk] * self.shape.warps
            self._blocks[tid.block] = blk
        wrp = blk[tid.warp]
        if isinstance(wrp, int):
            if wrp == value:
                return
            wrp = {l: wrp for l in range(self.shape.lanes)} if wrp else {}
            blk[tid.warp] = wrp
        if value:
            wrp[tid.lane] = value
        else:
            wrp.pop(tid.lane, None)

    def _expand_warp(self, wrp) -> dict[int, int]:
        if isinstance(wrp, int):
            return {l: wrp for l in range(self.shape.lanes)} if wrp else {}
        return wrp

    def _join_warp(self, mine, theirs):
        if isinstance(mine, int) and isinstance(theirs, int):
            return max(mine, theirs)
        a = self._expand_warp(mine)
        b = self._expand_warp(theirs)
        merged = dict(a)
        for lane, t in b.items():
            if t > merged.get(lane, 0):
                merged[lane] = t
        return self._compress_warp(merged)

    def _compress_warp(self, wrp):
        if isinstance(wrp, int):
            return wrp
        if not wrp:
            return 0
        if len(wrp) == self.shape.lanes:
            vals = set(wrp.values())
            if len(vals) == 1:
                return vals.pop()
        return wrp

    def _compress_block(self, blk):
        if isinstance(blk, int):
            return blk
        first = blk[0]
        if isinstance(first, int) and all(w == first for w in blk):
            return first
        return blk

    def join(self, other: Clock) -> None:
        if self.shape != other.shape:
            raise ValueError("clock shape mismatch")
        if isinstance(other, CompressedClock):
            for b in range(self.shape.blocks):
                mine = self._blocks[b]
                theirs = other._blocks[b]
                if isinstance(mine, int) and isinstance(theirs, int):
                    self._blocks[b] = max(mine, theirs)
                    continue
                mine_l = [mine] * self.shape.warps if isinstance(mine, int) else mine
                theirs_l = (
                    [theirs] * self.shape.warps if isinstance(theirs, int) else theirs
                )
                joined = [
                    self._join_warp(mine_l[w], theirs_l[w])
                    for w in range(self.shape.warps)
                ]
                self._blocks[b] = self._compress_block(joined)
        else:
            for tid in _all_tids(self.shape):
                t = other.get(tid)
                if t > self.get(tid):
                    self.set(tid, t)
            self.recompress()

    def leq(self, other: Clock) -> bool:
        if self.shape != other.shape:
            raise ValueError("clock shape mismatch")
        for b in range(self.shape.blocks):
            blk = self._blocks[b]
            if isinstance(blk, int):
                if blk == 0:
                    continue  # zero region is below anything
                warps: Iterable = ((w, blk) for w in range(self.shape.warps))
            else:
                warps = enumerate(blk)
            for w, wrp in warps:
                if isinstance(wrp, int):
                    if wrp == 0:
                        continue
                    entries: Iterable = ((l, wrp) for l in range(self.shape.lanes))
                else:
                    entries = wrp.items()
                for l, t in entries:
                    if t > other.get(ThreadId(b, w, l)):
                        return False
        return True

    def copy(self) -> "CompressedClock":
        out = CompressedClock(self.shape)
        out._blocks = [
            blk
            if isinstance(blk, int)
            else [w if isinstance(w, int) else dict(w) for w in blk]
            for blk in self._blocks
        ]
        return out

    def dense(self) -> tuple[int, ...]:
        return tuple(self.get(tid) for tid in _all_tids(self.shape))

    def recompress(self) -> None:
        for b in range(self.shape.blocks):
            blk = self._blocks[b]
            if isinstance(blk, int):
                continue
            blk = [self._compress_warp(w) for w in blk]
            self._blocks[b] = self._compress_block(blk)

    # -- representation accounting -----------------------------------------

    def rep_counts(self) -> tuple[int, int, int, int, int]:
        """(compressed blocks, expanded blocks, compressed warps,
        expanded warps, materialized integer entries)."""
        cb = eb = cw = ew = entries = 0
        for blk in self._blocks:
            if isinstance(blk, int):
                cb += 1
                entries += 1
                continue
            eb += 1
            for wrp in blk:
                if isinstance(wrp, int):
                    cw += 1
                    entries += 1
                else:
                    ew += 1
                    entries += len(wrp)
        return cb, eb, cw, ew, entries

    def __repr__(self) -> str:
        return f"CompressedClock({self._blocks})"


def _all_tids(shape: Shape):
    for b in range(shape.blocks):
        for w in range(shape.warps):
            for l in range(shape.lanes):
                yield ThreadId(b, w, l)


def join(a: Clock, b: Clock) -> Clock:
    """Pointwise max of two clocks, as a fresh clock."""
    out = a.copy()
    out.join(b)
    return out


def forced_barrier_join(
    clocks: list[tuple[ThreadId, Clock]], participants: Iterable[ThreadId]
) -> None:
    """Barrier join that equalizes the participant submatrix.

    Every participant's entry for every participant becomes the single
    highest value found in that submatrix; entries for other threads get
    the plain pointwise-max join. The result dominates the plain join and,
    when the participants form a whole block, leaves that block compressed
    in every participant clock. Clocks are updated in place.
    """
    parts = list(participants)
    if not parts:
        raise ValueError("empty participant set")
    if not clocks:
        return
    plain = clocks[0][1].copy()
    for _, c in clocks[1:]:
        plain.join(c)
    m_star = max(plain.get(u) for u in parts)
    for _, c in clocks:
        c.join(plain)
        for u in parts:
            c.set(u, m_star)
        if isinstance(c, CompressedClock):
            c.recompress()
