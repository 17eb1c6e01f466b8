"""Command-line entry point: ``lambdapa verify|run|fuzz``.

Exit codes: 0 success, 1 rejected / runtime fault / soundness violation,
2 parse or scope error, 3 I/O error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import fuzz, tracefmt
from .monitor import Ptr, run_traced
from .syntax import ParseError, ScopeError, parse, pretty
from .verifier import Accepted, explain, verify

EXIT_OK, EXIT_FAIL, EXIT_SYNTAX, EXIT_IO = 0, 1, 2, 3


def _load(path: str):
    text = Path(path).read_text(encoding="utf-8")
    return text, parse(text)


def _write(path: str, doc: dict) -> None:
    Path(path).write_text(tracefmt.dumps(doc), encoding="utf-8")


def cmd_verify(args) -> int:
    text, program = _load(args.path)
    verdict = verify(program)
    if args.emit_states:
        _write(args.emit_states, tracefmt.verdict_document(verdict, text))
    accepted = isinstance(verdict, Accepted)
    if args.trace:
        print(explain(verdict))
    elif not args.quiet:
        if accepted:
            print(explain(verdict).splitlines()[0])
        else:
            print(f"{args.path}:{verdict.at.line}:{verdict.at.column}: {verdict.reason} "
                  f"at `{pretty(verdict.node)}`")
    return EXIT_OK if accepted else EXIT_FAIL


def cmd_run(args) -> int:
    text, program = _load(args.path)
    result = run_traced(program, checked=args.monitor)
    if args.emit_states:
        _write(args.emit_states, tracefmt.run_document(result, text))
    if result.fault is not None:
        f = result.fault
        print(f"{args.path}:{f.span.line}:{f.span.column}: {f.kind}: {f.message}", file=sys.stderr)
        return EXIT_FAIL
    value = result.value
    print(f"&{value.name}" if isinstance(value, Ptr) else value)
    return EXIT_OK


def cmd_fuzz(args) -> int:
    if args.corpus:
        report = fuzz.differential_corpus(Path(args.corpus).glob("*.lpa"))
    else:
        if args.count < 1:
            print("--count must be at least 1", file=sys.stderr)
            return EXIT_SYNTAX
        cfg = fuzz.GenConfig(seed=args.seed, max_depth=args.max_depth)
        report = fuzz.differential(cfg, args.count, workers=args.workers)
    out = Path(args.out) if args.out else None
    written = []
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(json.dumps(report.to_json(), indent=2) + "\n")
        for i, v in enumerate(report.soundness_violations):
            path = out / f"counterexample_{i:03d}.lpa"
            path.write_text((v.shrunk or v.program) + "\n")
            written.append(path)
    print(f"total={report.total} accepted={report.accepted} rejected={report.rejected} "
          f"soundness_violations={len(report.soundness_violations)} "
          f"trace_mismatches={len(report.trace_mismatches)}")
    if report.soundness_violations:
        for v in report.soundness_violations:
            print(f"violation: {v.shrunk or v.program} ({v.monitor})", file=sys.stderr)
        for path in written:
            print(f"counterexample: {path}", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lambdapa", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify", help="statically verify a .lpa program")
    p.add_argument("path")
    p.add_argument("--emit-states", metavar="OUT", help="write the JSON proof trace")
    p.add_argument("--trace", action="store_true", help="print the full explanation")
    p.add_argument("--quiet", action="store_true", help="print nothing; use the exit code")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("run", help="execute a .lpa program")
    p.add_argument("path")
    p.add_argument("--monitor", action="store_true",
                   help="enforce the fractional-capability discipline at runtime")
    p.add_argument("--emit-states", metavar="OUT", help="write the JSON state snapshots")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("fuzz", help="differential test verifier against monitor")
    p.add_argument("--count", type=int, default=1000, help="programs to generate (default 1000)")
    p.add_argument("--seed", type=int, default=0, help="generator seed")
    p.add_argument("--max-depth", type=int, default=fuzz.GenConfig.max_depth, help="AST depth bound")
    p.add_argument("--workers", type=int, default=1, help="worker processes")
    p.add_argument("--corpus", metavar="DIR", help="replay .lpa files instead of generating")
    p.add_argument("--out", metavar="DIR", help="write report.json and counterexamples here")
    p.set_defaults(func=cmd_fuzz)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ParseError, ScopeError) as err:
        print(f"{getattr(args, 'path', '')}:{err}", file=sys.stderr)
        return EXIT_SYNTAX
    except OSError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
