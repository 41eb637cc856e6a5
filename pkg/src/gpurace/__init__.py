"""Trace-driven data-race detection for GPU kernels.

Three detectors over one trace format: a predictive partial-order
tracker (``gwcp``), a scoped happens-before tracker (``hb``), and a
scoped-lockset baseline (``lockset``), plus an exhaustive reordering
oracle for ground truth on small traces.
"""

from .engine import RunResult, run
from .gwcp import GwcpDetector
from .hb import HbDetector
from .litmus import corpus_names, gen_litmus, gen_random
from .lockset import LocksetDetector
from .oracle import OracleResult, predictable_races
from .trace import (
    Diagnostic,
    Event,
    Location,
    Scope,
    ThreadId,
    Trace,
    TraceConfig,
    TraceParseError,
    format_trace,
    infer_locks,
    parse_trace,
    validate_trace,
)
from .vclock import CompressedClock, DenseClock, Epoch, Shape, epoch_leq, forced_barrier_join

__version__ = "0.1.0"

__all__ = [
    "CompressedClock",
    "DenseClock",
    "Diagnostic",
    "Epoch",
    "Event",
    "GwcpDetector",
    "HbDetector",
    "Location",
    "LocksetDetector",
    "OracleResult",
    "RunResult",
    "Scope",
    "Shape",
    "ThreadId",
    "Trace",
    "TraceConfig",
    "TraceParseError",
    "corpus_names",
    "epoch_leq",
    "forced_barrier_join",
    "format_trace",
    "gen_litmus",
    "gen_random",
    "infer_locks",
    "parse_trace",
    "predictable_races",
    "run",
    "validate_trace",
]
