"""Forward symbolic execution of λ_PA over the fractional resource logic.

Each heap-touching step first asks ``saturate_end`` for the permission it
needs, so reference-end shifts are applied lazily, right where a
precondition would otherwise fail. Write, free and mutable borrow need the
full fraction; read and shared borrow need any positive fraction.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from fractions import Fraction

from .logic import (
    ONE,
    Chunk,
    Int,
    PointsTo,
    Ref,
    RefId,
    Shift,
    ShiftError,
    SymState,
    SymValue,
    format_frac,
    mutable_borrow,
    saturate_steps,
    shared_borrow,
)
from .syntax import (
    Expr,
    Free,
    IntLit,
    Let,
    MutBorrow,
    New,
    Read,
    Seq,
    ShrBorrow,
    SourceSpan,
    Var,
    Write,
    check_scopes,
    pretty,
)

WRITE_WITHOUT_FULL_PERMISSION = "WriteWithoutFullPermission"
READ_WITHOUT_PERMISSION = "ReadWithoutPermission"
FREE_WITHOUT_FULL_PERMISSION = "FreeWithoutFullPermission"
BORROW_TARGET_NOT_REFERENCE = "BorrowTargetNotReference"
USE_AFTER_END = "UseAfterEnd"


@dataclass(frozen=True)
class TraceEntry:
    after_span: SourceSpan | None
    state: SymState
    shifts_applied: tuple[Shift, ...] = ()
    kind: str = "step"  # "step", "vs" (one reference-end shift) or "exit"
    op: str = ""
    target: RefId | None = None
    node: Expr | None = field(default=None, compare=False, repr=False)


@dataclass
class Accepted:
    trace: list[TraceEntry]
    leak_warnings: list[Chunk]
    value: SymValue | None = None

    @property
    def final_state(self) -> SymState:
        return self.trace[-1].state


@dataclass
class Rejected:
    at: SourceSpan | None
    reason: str
    trace: list[TraceEntry]
    node: Expr | None = None
    target: RefId | None = None
    detail: str = ""


Verdict = Accepted | Rejected


class Rejection(Exception):
    def __init__(self, reason: str, node: Expr, target: RefId | None, detail: str):
        self.reason = reason
        self.node = node
        self.target = target
        self.detail = detail
        super().__init__(f"{reason} at {node.span}: {detail}")


# per operation: (needed fraction, reason when it cannot be had)
_REQUIREMENTS = {
    "read": (None, READ_WITHOUT_PERMISSION),
    "write": (ONE, WRITE_WITHOUT_FULL_PERMISSION),
    "free": (ONE, FREE_WITHOUT_FULL_PERMISSION),
    "mutborrow": (ONE, WRITE_WITHOUT_FULL_PERMISSION),
    "shrborrow": (None, USE_AFTER_END),
}


class _Executor:
    def __init__(self, trace: list[TraceEntry] | None):
        self.trace = trace

    def record(self, entry: TraceEntry) -> None:
        if self.trace is not None:
            self.trace.append(entry)

    def fresh(self, s: SymState, hint: str | None) -> tuple[RefId, SymState]:
        gen = s.next_generation
        return RefId(gen, hint or f"_r{gen}"), replace(s, next_generation=gen + 1)

    def as_ref(self, v: SymValue, node: Expr) -> RefId:
        if not isinstance(v, Ref):
            raise Rejection(BORROW_TARGET_NOT_REFERENCE, node, None,
                            f"`{pretty(node)}` needs a reference but got integer {v}")
        return v.id

    def acquire(self, s: SymState, p: RefId, op: str, node: Expr) -> tuple[PointsTo, SymState, tuple[Shift, ...]]:
        """Saturate so that ``p`` meets the requirement of ``op``; record the shifts."""
        needed, reason = _REQUIREMENTS[op]
        try:
            steps = saturate_steps(s, p, needed)
        except ShiftError as err:
            have = s.frac_of(p)
            held = "no points-to resource" if have == 0 else f"only {format_frac(have)}"
            wants = "full permission" if needed == ONE else "a positive fraction"
            raise Rejection(reason, node, p,
                            f"{op} through {p} requires {wants}, but {p} holds {held}"
                            + (f" ({err})" if have else "")) from None
        for shift, after in steps:
            self.record(TraceEntry(node.span, after, (shift,), "vs", op, p, node))
        if steps:
            s = steps[-1][1]
        chunk = s.pointsto(p)
        assert chunk is not None
        s = replace(s, last_use={**s.last_use, p: s.clock}, clock=s.clock + 1)
        return chunk, s, tuple(shift for shift, _ in steps)

    def step_done(self, s: SymState, shifts, op: str, target, node: Expr) -> None:
        self.record(TraceEntry(node.span, s, shifts, "step", op, target, node))

    def run(self, e: Expr, s: SymState, hint: str | None = None) -> tuple[SymValue, SymState]:
        if isinstance(e, IntLit):
            return Int(e.value), s
        if isinstance(e, Var):
            return s.env[e.name], s
        if isinstance(e, New):
            v, s = self.run(e.init, s)
            r, s = self.fresh(s, hint)
            cell = r.generation
            s = replace(s, lineage={**s.lineage, r: cell}, live_cells=s.live_cells | {cell})
            s = s.with_chunks([*s.chunks, PointsTo(r, ONE, v)])
            self.step_done(s, (), "new", r, e)
            return Ref(r), s
        if isinstance(e, Free):
            tv, s = self.run(e.target, s)
            p = self.as_ref(tv, e)
            chunk, s, shifts = self.acquire(s, p, "free", e)
            s = replace(s, live_cells=s.live_cells - {s.lineage[p]})
            s = s.with_chunks(c for c in s.chunks if c != chunk)
            self.step_done(s, shifts, "free", p, e)
            return Int(0), s
        if isinstance(e, Read):
            tv, s = self.run(e.target, s)
            p = self.as_ref(tv, e)
            chunk, s, shifts = self.acquire(s, p, "read", e)
            self.step_done(s, shifts, "read", p, e)
            return chunk.value, s
        if isinstance(e, Write):
            tv, s = self.run(e.target, s)
            v, s = self.run(e.value, s)
            p = self.as_ref(tv, e)
            chunk, s, shifts = self.acquire(s, p, "write", e)
            s = s.with_chunks([c for c in s.chunks if c != chunk] + [PointsTo(p, ONE, v)])
            self.step_done(s, shifts, "write", p, e)
            return Int(0), s
        if isinstance(e, (MutBorrow, ShrBorrow)):
            op = "mutborrow" if isinstance(e, MutBorrow) else "shrborrow"
            rule = mutable_borrow if op == "mutborrow" else shared_borrow
            tv, s = self.run(e.target, s)
            p = self.as_ref(tv, e)
            _, s, shifts = self.acquire(s, p, op, e)
            r, s = self.fresh(s, hint)
            s = rule(s, p, r)
            self.step_done(s, shifts, op, p, e)
            return Ref(r), s
        if isinstance(e, Let):
            v, s = self.run(e.bound, s, hint=e.name)
            outer = s.env
            s = replace(s, env={**outer, e.name: v})
            result, s = self.run(e.body, s, hint=hint)
            env = dict(s.env)
            if e.name in outer:
                env[e.name] = outer[e.name]
            else:
                del env[e.name]
            return result, replace(s, env=env)
        if isinstance(e, Seq):
            _, s = self.run(e.first, s)
            return self.run(e.second, s, hint=hint)
        raise TypeError(f"not an expression: {e!r}")


def sym_exec(e: Expr, s: SymState, trace: list[TraceEntry] | None = None) -> tuple[SymValue, SymState]:
    """Execute ``e`` symbolically from ``s``; raises Rejection on a failed precondition."""
    return _Executor(trace).run(e, s)


def verify(program: Expr, initial: SymState | None = None) -> Verdict:
    check_scopes(program, frozenset((initial.env if initial else {}).keys()))
    start = initial if initial is not None else SymState()
    trace: list[TraceEntry] = []
    try:
        value, final = sym_exec(program, start, trace)
    except Rejection as rej:
        return Rejected(rej.node.span, rej.reason, trace, rej.node, rej.target, rej.detail)
    trace.append(TraceEntry(program.span, final, (), "exit", "exit", None, program))
    leaks = [c for c in final.chunks if c not in start.chunks]
    return Accepted(trace, leaks, value)


def _ended_by(trace: list[TraceEntry], ref: RefId) -> TraceEntry | None:
    for entry in reversed(trace):
        if entry.kind == "vs" and any(sh.borrower == ref for sh in entry.shifts_applied):
            return entry
    return None


def explain(verdict: Verdict) -> str:
    if isinstance(verdict, Accepted):
        n = len(verdict.leak_warnings)
        if n == 0:
            return "verified; final state empty"
        noun = "resource" if n == 1 else "resources"
        lines = [f"verified; {n} leaked {noun}"]
        lines += [f"  leaked: {c}" for c in verdict.leak_warnings]
        return "\n".join(lines)

    where = f"line {verdict.at.line}, column {verdict.at.column}" if verdict.at else "unknown location"
    code = pretty(verdict.node) if verdict.node is not None else "?"
    lines = [f"rejected at {where}: `{code}`", f"  {verdict.reason}: {verdict.detail}"]
    if verdict.target is not None:
        ender = _ended_by(verdict.trace, verdict.target)
        if ender is not None and ender.node is not None:
            via = f" through {ender.target}" if ender.target is not None else ""
            lines.append(
                f"  {verdict.target}'s borrow was ended at line {ender.after_span.line} "
                f"(`{pretty(ender.node)}`) by the {ender.op}{via}"
            )
    attempted = [e for e in verdict.trace if e.kind == "vs"]
    if attempted:
        lines.append("  shifts applied so far:")
        lines += [
            f"    line {e.after_span.line}: end {sh.borrower} -> {sh.lender} ({format_frac(sh.frac)})"
            for e in attempted for sh in e.shifts_applied
        ]
    return "\n".join(lines)


def fraction_history(trace: list[TraceEntry], name: str) -> list[Fraction]:
    """Fraction held by the reference displayed as ``name`` at each entry where it holds one."""
    out = []
    for entry in trace:
        for c in entry.state.chunks:
            if isinstance(c, PointsTo) and c.ref.display_name == name:
                out.append(c.frac)
    return out
