"""JSON trace documents shared by the verifier and the dynamic monitor.

Both producers emit the same schema so their traces can be diffed directly::

    {"version": "1", "producer": ..., "program": <source>, "result": {...},
     "entries": [{"kind": "step"|"vs"|"exit", "after_line": int,
                  "chunks": [...], "shifts": [...]}, ...]}

References are named by their binding variable; when several references
share a name, each gets a ``name#generation`` label instead.
"""

from __future__ import annotations

import json
from collections import defaultdict
from fractions import Fraction
from typing import Any

from .logic import Int, PointsTo, Ref, RefEnd, RefId, format_frac
from .monitor import Ptr, RunResult
from .verifier import Accepted, Verdict

VERSION = "1"


class _Labels:
    def __init__(self, refs):
        by_name = defaultdict(set)
        for key, name in refs:
            by_name[name].add(key)
        self.clash = {name for name, keys in by_name.items() if len(keys) > 1}

    def __call__(self, key: int, name: str) -> str:
        return f"{name}#{key}" if name in self.clash else name


def _pointsto(label: str, frac: Fraction, value) -> dict[str, Any]:
    return {"kind": "pointsto", "ref": label, "frac": format_frac(frac), "value": value}


def _refend(borrower: str, lender: str, frac: Fraction) -> dict[str, Any]:
    return {"kind": "refend", "borrower": borrower, "lender": lender, "frac": format_frac(frac)}


def _shift(borrower: str, lender: str, frac: Fraction) -> dict[str, Any]:
    return {"borrower": borrower, "lender": lender, "frac": format_frac(frac)}


def _sort_chunks(chunks: list[dict]) -> list[dict]:
    return sorted(chunks, key=lambda c: (c["kind"], c.get("ref") or c["borrower"], c.get("lender", "")))


def _line(span) -> int:
    return span.line if span is not None else 0


# --- verifier ------------------------------------------------------------


def _sym_refs(trace) -> set[tuple[int, str]]:
    refs: set[RefId] = set()
    for entry in trace:
        for c in entry.state.chunks:
            if isinstance(c, PointsTo):
                refs.add(c.ref)
                if isinstance(c.value, Ref):
                    refs.add(c.value.id)
            else:
                refs.update((c.borrower, c.lender))
        for sh in entry.shifts_applied:
            refs.update((sh.borrower, sh.lender))
    return {(r.generation, r.display_name) for r in refs}


def verdict_document(verdict: Verdict, program_text: str = "") -> dict[str, Any]:
    trace = verdict.trace
    label = _Labels(_sym_refs(trace))

    def name(r: RefId) -> str:
        return label(r.generation, r.display_name)

    def value(v):
        return v.value if isinstance(v, Int) else f"&{name(v.id)}"

    entries = []
    for entry in trace:
        chunks = []
        for c in entry.state.chunks:
            if isinstance(c, PointsTo):
                chunks.append(_pointsto(name(c.ref), c.frac, value(c.value)))
            elif isinstance(c, RefEnd):
                chunks.append(_refend(name(c.borrower), name(c.lender), c.frac))
        entries.append({
            "kind": entry.kind,
            "after_line": entry.after_span.last_line if entry.kind == "exit" and entry.after_span
            else _line(entry.after_span),
            "chunks": _sort_chunks(chunks),
            "shifts": [_shift(name(s.borrower), name(s.lender), s.frac) for s in entry.shifts_applied],
        })
    if isinstance(verdict, Accepted):
        result = {"verdict": "accepted", "leaks": len(verdict.leak_warnings)}
    else:
        result = {
            "verdict": "rejected",
            "reason": verdict.reason,
            "line": _line(verdict.at),
            "column": verdict.at.column if verdict.at else 0,
        }
    return {"version": VERSION, "producer": "verifier", "program": program_text,
            "result": result, "entries": entries}


# --- monitor -------------------------------------------------------------


def run_document(result: RunResult, program_text: str = "") -> dict[str, Any]:
    ptrs: set[Ptr] = set()
    for snap in result.snapshots:
        for p, _, _, v in snap.caps:
            ptrs.add(p)
            if isinstance(v, Ptr):
                ptrs.add(v)
        for b, l, _ in (*snap.pending, *snap.shifts):
            ptrs.update((b, l))
    label = _Labels({(p.ident, p.name) for p in ptrs})

    def name(p: Ptr) -> str:
        return label(p.ident, p.name)

    def value(v):
        return f"&{name(v)}" if isinstance(v, Ptr) else v

    entries = []
    for snap in result.snapshots:
        chunks = [_pointsto(name(p), frac, value(v)) for p, _, frac, v in snap.caps]
        chunks += [_refend(name(b), name(l), frac) for b, l, frac in snap.pending]
        entries.append({
            "kind": snap.kind,
            "after_line": snap.span.last_line if snap.kind == "exit" and snap.span
            else _line(snap.span),
            "chunks": _sort_chunks(chunks),
            "shifts": [_shift(name(b), name(l), frac) for b, l, frac in snap.shifts],
        })
    if result.fault is None:
        v = result.value
        outcome = {"outcome": "ok", "value": value(v)}
    else:
        outcome = {"outcome": "fault", "kind": result.fault.kind,
                   "line": _line(result.fault.span),
                   "column": result.fault.span.column if result.fault.span else 0}
    return {"version": VERSION, "producer": "monitor", "program": program_text,
            "result": outcome, "entries": entries}


def dumps(doc: dict[str, Any]) -> str:
    return json.dumps(doc, indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def fraction_map(entry: dict[str, Any]) -> dict[str, Fraction]:
    """Reference label -> fraction for one serialized trace entry."""
    return {c["ref"]: Fraction(c["frac"]) for c in entry["chunks"] if c["kind"] == "pointsto"}
