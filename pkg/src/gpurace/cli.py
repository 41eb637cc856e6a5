"""Command-line front end.

Exit codes: 0 no races, 1 races found, 2 usage or parse error,
3 validation error.
"""

from __future__ import annotations

import argparse
import json
import sys
from typing import NoReturn

from . import engine, litmus, oracle
from .gwcp import GwcpDetector
from .hb import HbDetector
from .lockset import LocksetDetector
from .trace import Trace, TraceParseError, format_trace, infer_locks, parse_trace, validate_trace

EXIT_CLEAN = 0
EXIT_RACES = 1
EXIT_USAGE = 2
EXIT_INVALID = 3


def _load_trace(path: str, *, infer: bool = False) -> Trace:
    try:
        with open(path, encoding="utf-8") as fh:
            trace = parse_trace(fh.read())
    except OSError as e:
        _die(EXIT_USAGE, f"cannot read {path}: {e}")
    except TraceParseError as e:
        _die(EXIT_USAGE, f"{path}: {e}")
    if infer:
        trace, diags = infer_locks(trace)
        for d in diags:
            print(f"{path}: lock inference: {d}", file=sys.stderr)
    diags = validate_trace(trace)
    if diags:
        for d in diags:
            print(f"{path}: {d}", file=sys.stderr)
        _die(EXIT_INVALID, f"{path}: trace is not well formed")
    return trace


def _die(code: int, message: str) -> NoReturn:
    print(message, file=sys.stderr)
    raise SystemExit(code)


def _make_detector(args: argparse.Namespace, trace: Trace):
    if args.detector == "gwcp":
        return GwcpDetector(
            trace.config,
            compress=not args.no_compress,
            inactive_opt=not args.no_inactive_opt,
        )
    if args.detector == "hb":
        return HbDetector(trace.config, compress=not args.no_compress)
    return LocksetDetector(trace.config, warp_granularity=args.warp_granularity)


def _cmd_check(args: argparse.Namespace) -> int:
    trace = _load_trace(args.trace, infer=args.infer_locks)
    if args.order_matrix:
        if args.detector == "lockset":
            _die(EXIT_USAGE, "--order-matrix needs a clock-based detector")
        if len(trace.events) > 50:
            _die(EXIT_USAGE, "--order-matrix is limited to traces of 50 events")
    detector = _make_detector(args, trace)
    result = engine.run(trace, detector, order_matrix=args.order_matrix)
    for rep in result.reports:
        print(rep.to_json())
    for d in result.diagnostics:
        print(f"{args.trace}: {d}", file=sys.stderr)
    if args.order_matrix:
        matrix = {
            "order_matrix": {
                "events": result.n_events,
                "ordered": [list(p) for p in result.ordered_pairs or []],
            }
        }
        print(json.dumps(matrix, separators=(",", ":")))
    return EXIT_RACES if result.raced else EXIT_CLEAN


def _cmd_compare(args: argparse.Namespace) -> int:
    trace = _load_trace(args.trace, infer=args.infer_locks)
    verdicts: dict[str, object] = {}
    for det in (
        GwcpDetector(trace.config),
        HbDetector(trace.config),
        LocksetDetector(trace.config),
    ):
        verdicts[det.name] = 1 if engine.run(trace, det).raced else 0
    if len(trace.events) <= args.limit:
        res = oracle.predictable_races(trace, limit=args.limit, budget=args.budget)
        verdicts["oracle"] = 1 if res.raced else 0
        if not res.complete:
            verdicts["oracle_complete"] = False
    else:
        verdicts["oracle"] = None
    if args.json:
        print(json.dumps(verdicts, separators=(",", ":")))
    else:
        print(
            " ".join(
                f"{k}:{'-' if v is None else v}" for k, v in verdicts.items()
            )
        )
    return EXIT_CLEAN


def _cmd_oracle(args: argparse.Namespace) -> int:
    trace = _load_trace(args.trace, infer=args.infer_locks)
    try:
        res = oracle.predictable_races(trace, limit=args.limit, budget=args.budget)
    except oracle.OracleLimitError as e:
        _die(EXIT_USAGE, str(e))
    out = {
        "pairs": [list(p) for p in sorted(res.pairs)],
        "complete": res.complete,
    }
    print(json.dumps(out, separators=(",", ":")))
    return EXIT_RACES if res.raced else EXIT_CLEAN


def _cmd_gen(args: argparse.Namespace) -> int:
    if args.list:
        for name in litmus.corpus_names():
            entry = litmus.corpus_entry(name)
            expected = " ".join(f"{k}={v}" for k, v in entry.expected.items())
            print(f"{name}: {expected}")
        return EXIT_CLEAN
    if args.name is None:
        _die(EXIT_USAGE, "gen needs a litmus name, 'random', or --list")
    if args.name == "random":
        trace = litmus.gen_random(args.seed, events=args.events)
        text = format_trace(trace)
    else:
        try:
            text = litmus.corpus_entry(args.name).text
        except KeyError as e:
            _die(EXIT_USAGE, str(e.args[0]))
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_CLEAN


def _cmd_stats(args: argparse.Namespace) -> int:
    trace = _load_trace(args.trace, infer=args.infer_locks)
    detector = GwcpDetector(trace.config, compress=True, forced_barriers=True)
    result = engine.run(trace, detector, collect_stats=True)
    print(json.dumps(result.stats, separators=(",", ":")))
    return EXIT_CLEAN


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gpurace",
        description="Trace-driven data-race detection for GPU kernels.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p: argparse.ArgumentParser) -> None:
        p.add_argument("trace", help="trace file")
        p.add_argument(
            "--infer-locks",
            action="store_true",
            help="infer ad-hoc lock operations from atomic/fence idioms first",
        )

    p = sub.add_parser("check", help="run one detector over a trace")
    add_common(p)
    p.add_argument("--detector", choices=["gwcp", "hb", "lockset"], default="gwcp")
    p.add_argument("--no-compress", action="store_true", help="dense vector clocks")
    p.add_argument(
        "--no-inactive-opt",
        action="store_true",
        help="disable shared queues for lock-inactive threads",
    )
    p.add_argument(
        "--warp-granularity",
        action="store_true",
        help="lockset only: collapse thread identity to warps",
    )
    p.add_argument(
        "--order-matrix",
        action="store_true",
        help="also emit the pairwise order relation (traces of at most 50 events)",
    )
    p.add_argument("--json", action="store_true", help="accepted for symmetry")
    p.set_defaults(func=_cmd_check)

    p = sub.add_parser("compare", help="verdicts from all detectors and the oracle")
    add_common(p)
    p.add_argument("--limit", type=int, default=20, help="oracle event limit")
    p.add_argument("--budget", type=int, default=10_000_000, help="oracle state budget")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=_cmd_compare)

    p = sub.add_parser("oracle", help="enumerate predictable race pairs")
    add_common(p)
    p.add_argument("--limit", type=int, default=20)
    p.add_argument("--budget", type=int, default=10_000_000)
    p.set_defaults(func=_cmd_oracle)

    p = sub.add_parser("gen", help="write a litmus or random trace")
    p.add_argument("name", nargs="?", help="litmus name or 'random'")
    p.add_argument("--list", action="store_true", help="list litmus traces and verdicts")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--events", type=int, default=12)
    p.add_argument("--out", help="output file (default stdout)")
    p.set_defaults(func=_cmd_gen)

    p = sub.add_parser("stats", help="clock compression counters for a trace")
    add_common(p)
    p.set_defaults(func=_cmd_stats)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        # argparse exits with 2 on usage errors already
        raise SystemExit(EXIT_USAGE if e.code not in (0,) else 0) from None
    try:
        return args.func(args)
    except SystemExit:
        raise
    except BrokenPipeError:
        return EXIT_CLEAN


if __name__ == "__main__":
    raise SystemExit(main())
