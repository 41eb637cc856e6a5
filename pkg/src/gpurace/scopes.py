"""Scope algebra shared by all detectors.

Block-scoped synchronization only orders threads of one block; device
scope orders everything. These three predicates encode when scoped locks
guarantee mutual exclusion, when a pair of atomics cannot race, and when
a release is visible to a later acquire.
"""

from __future__ import annotations

from typing import NamedTuple

from .trace import DEVICE, Scope, ThreadId


class LockInstance(NamedTuple):
    """A lock as seen at one scope: device-wide or per acquiring block."""

    lock: int
    scope: Scope


def scopes_overlap(a: LockInstance, b: LockInstance) -> bool:
    """True iff critical sections on these instances mutually exclude."""
    if a.lock != b.lock:
        raise ValueError("scope overlap is defined per lock")
    if a.scope.kind == DEVICE or b.scope.kind == DEVICE:
        return True
    return a.scope.block == b.scope.block


def atomics_cover(
    a_atomic: bool,
    a_scope: Scope | None,
    b_atomic: bool,
    b_scope: Scope | None,
    tid_a: ThreadId,
    tid_b: ThreadId,
) -> bool:
    """True iff a conflicting access pair is exempt because both are
    atomics whose scopes cover both threads (suppress the race report)."""
    if not (a_atomic and b_atomic):
        return False
    assert a_scope is not None and b_scope is not None
    if a_scope.kind == DEVICE or b_scope.kind == DEVICE:
        return True
    return tid_a.block == tid_b.block


def release_acquire_orders(release_scope: Scope, acquire_scope: Scope) -> bool:
    """True iff a release at one scope synchronizes with a later acquire:
    both block-scoped within one block, or at least one at device scope.

    Block scopes carry the issuing thread's block, so the scopes alone
    decide.
    """
    if release_scope.kind == DEVICE or acquire_scope.kind == DEVICE:
        return True
    return release_scope.block == acquire_scope.block
