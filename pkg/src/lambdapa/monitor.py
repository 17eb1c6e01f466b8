"""Concrete interpreter for λ_PA with a fractional-capability ghost table.

Every reference value carries a fresh identity. The ghost table maps each
identity to the cell it aliases and the fraction it currently owns; pending
borrows record who must return how much to whom. A write or free through
``p`` first force-ends the borrows rooted at ``p`` (revoking the borrowers'
capabilities) and then demands the whole cell.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

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
)

ALIAS_VIOLATION = "AliasViolation"
USE_AFTER_END = "UseAfterEnd"
DOUBLE_FREE = "DoubleFree"
UNBOUND_REF = "UnboundRef"


@dataclass(frozen=True)
class Ptr:
    """A runtime reference value: unique identity plus the name it was bound to."""

    ident: int
    name: str


@dataclass
class Cap:
    cell: int
    frac: Fraction


@dataclass
class Pending:
    borrower: Ptr
    lender: Ptr
    frac: Fraction


@dataclass
class ConcreteState:
    heap: dict[int, object] = field(default_factory=dict)
    caps: dict[Ptr, Cap] = field(default_factory=dict)
    pending: list[Pending] = field(default_factory=list)
    env: dict[str, object] = field(default_factory=dict)


@dataclass(frozen=True)
class Snapshot:
    span: SourceSpan | None
    kind: str  # "step", "vs" or "exit"
    caps: tuple[tuple[Ptr, int, Fraction, object], ...]
    pending: tuple[tuple[Ptr, Ptr, Fraction], ...]
    shifts: tuple[tuple[Ptr, Ptr, Fraction], ...]
    live_cells: frozenset[int]

    def cell_sums(self) -> dict[int, Fraction]:
        sums = {c: Fraction(0) for c in self.live_cells}
        for _, cell, frac, _ in self.caps:
            sums[cell] = sums.get(cell, Fraction(0)) + frac
        return sums


class RuntimeFault(Exception):
    def __init__(self, kind: str, span: SourceSpan | None, message: str = ""):
        self.kind = kind
        self.span = span
        self.message = message
        super().__init__(f"{kind} at {span}: {message}" if message else f"{kind} at {span}")


class _Machine:
    def __init__(self, checked: bool, traced: bool):
        self.checked = checked
        self.traced = traced
        self.st = ConcreteState()
        self.freed: set[int] = set()
        self.next_ident = 0
        self.tick = 0
        self.last_access: dict[Ptr, int] = {}
        # every pointer's cell, including pointers whose capability is gone
        self.cells: dict[Ptr, int] = {}
        self.snapshots: list[Snapshot] = []
        self.step_shifts: list[tuple[Ptr, Ptr, Fraction]] = []

    # --- ghost bookkeeping ---

    def snapshot(self, span, kind, shifts=None):
        if not self.traced:
            return
        if shifts is None:
            shifts, self.step_shifts = self.step_shifts, []
        caps = tuple(
            (p, cap.cell, cap.frac, self.st.heap[cap.cell])
            for p, cap in sorted(self.st.caps.items(), key=lambda kv: kv[0].ident)
            if cap.cell in self.st.heap
        )
        pending = tuple((pd.borrower, pd.lender, pd.frac) for pd in self.st.pending)
        self.snapshots.append(
            Snapshot(span, kind, caps, pending, tuple(shifts), frozenset(self.st.heap))
        )

    def new_ptr(self, hint: str | None) -> Ptr:
        ident = self.next_ident
        self.next_ident += 1
        return Ptr(ident, hint or f"_r{ident}")

    def held(self, p: Ptr) -> Fraction:
        cap = self.st.caps.get(p)
        return cap.frac if cap else Fraction(0)

    def give_back(self, pd: Pending, span) -> None:
        bcap = self.st.caps[pd.borrower]
        bcap.frac -= pd.frac
        if bcap.frac == 0:
            del self.st.caps[pd.borrower]
        lcap = self.st.caps.get(pd.lender)
        if lcap is None:
            self.st.caps[pd.lender] = Cap(bcap.cell, pd.frac)
        else:
            lcap.frac += pd.frac
        self.st.pending.remove(pd)
        if self.traced:
            shift = (pd.borrower, pd.lender, pd.frac)
            self.step_shifts.append(shift)
            self.snapshot(span, "vs", [shift])

    def can_reclaim(self, p: Ptr, want: Fraction | None, seen: frozenset) -> bool:
        """Dry run of ``reclaim`` on copied ghost state."""
        saved = (
            {k: Cap(v.cell, v.frac) for k, v in self.st.caps.items()},
            list(self.st.pending),
            self.traced,
        )
        self.traced = False
        try:
            return self.reclaim(p, want, seen, None)
        finally:
            self.st.caps, self.st.pending, self.traced = saved

    def reclaim(self, p: Ptr, want: Fraction | None, seen: frozenset, span) -> bool:
        """Force-end borrows lent by ``p``, deepest first, until ``p`` owns ``want``."""

        def satisfied() -> bool:
            h = self.held(p)
            return h > 0 if want is None else h >= want

        if satisfied():
            return True
        lent = [pd for pd in self.st.pending if pd.lender == p]
        # unused borrowers first (newest first), then by least recent access
        lent.sort(key=lambda pd: (self.last_access.get(pd.borrower, -1), -pd.borrower.ident))
        for pd in lent:
            b = pd.borrower
            if b in seen or pd not in self.st.pending:
                continue
            if self.held(b) < pd.frac:
                if not self.can_reclaim(b, pd.frac, seen | {b}):
                    continue
                self.reclaim(b, pd.frac, seen | {b}, span)
            self.give_back(pd, span)
            if satisfied():
                return True
        return False

    # --- accesses ---

    def pointer(self, v, span) -> Ptr:
        if not isinstance(v, Ptr):
            raise RuntimeFault(UNBOUND_REF, span, f"{v!r} is not a reference")
        return v

    def cell_of(self, p: Ptr, span, *, freeing: bool = False) -> int:
        cell = self.cells[p]
        if cell in self.freed:
            raise RuntimeFault(DOUBLE_FREE if freeing else USE_AFTER_END, span,
                               f"cell behind {p.name} was already freed")
        return cell

    def demand(self, p: Ptr, want: Fraction | None, fault: str, span) -> None:
        if self.checked:
            self.reclaim(p, want, frozenset({p}), span)
            h = self.held(p)
            if (h == 0) if want is None else (h != want):
                raise RuntimeFault(fault, span, f"{p.name} owns {h} of its cell")
        self.last_access[p] = self.tick
        self.tick += 1

    def exec(self, e: Expr, hint: str | None = None):
        st = self.st
        if isinstance(e, IntLit):
            return e.value
        if isinstance(e, Var):
            return st.env[e.name]
        if isinstance(e, New):
            v = self.exec(e.init)
            p = self.new_ptr(hint)
            cell = p.ident
            st.heap[cell] = v
            self.cells[p] = cell
            st.caps[p] = Cap(cell, Fraction(1))
            self.snapshot(e.span, "step")
            return p
        if isinstance(e, Free):
            p = self.pointer(self.exec(e.target), e.span)
            cell = self.cell_of(p, e.span, freeing=True)
            self.demand(p, Fraction(1), ALIAS_VIOLATION, e.span)
            del st.heap[cell]
            self.freed.add(cell)
            st.caps.pop(p, None)
            self.snapshot(e.span, "step")
            return 0
        if isinstance(e, Read):
            p = self.pointer(self.exec(e.target), e.span)
            cell = self.cell_of(p, e.span)
            self.demand(p, None, USE_AFTER_END, e.span)
            v = st.heap[cell]
            self.snapshot(e.span, "step")
            return v
        if isinstance(e, Write):
            target = self.exec(e.target)
            v = self.exec(e.value)
            p = self.pointer(target, e.span)
            cell = self.cell_of(p, e.span)
            self.demand(p, Fraction(1), ALIAS_VIOLATION, e.span)
            st.heap[cell] = v
            self.snapshot(e.span, "step")
            return 0
        if isinstance(e, MutBorrow):
            p = self.pointer(self.exec(e.target), e.span)
            cell = self.cell_of(p, e.span)
            self.demand(p, Fraction(1), ALIAS_VIOLATION, e.span)
            r = self.new_ptr(hint)
            self.cells[r] = cell
            if self.checked:
                st.caps.pop(p)
                st.caps[r] = Cap(cell, Fraction(1))
                st.pending.append(Pending(r, p, Fraction(1)))
            self.snapshot(e.span, "step")
            return r
        if isinstance(e, ShrBorrow):
            p = self.pointer(self.exec(e.target), e.span)
            cell = self.cell_of(p, e.span)
            self.demand(p, None, USE_AFTER_END, e.span)
            r = self.new_ptr(hint)
            self.cells[r] = cell
            if self.checked:
                half = st.caps[p].frac / 2
                st.caps[p].frac = half
                st.caps[r] = Cap(cell, half)
                st.pending.append(Pending(r, p, half))
            self.snapshot(e.span, "step")
            return r
        if isinstance(e, Let):
            v = self.exec(e.bound, hint=e.name)
            missing = object()
            saved = st.env.get(e.name, missing)
            st.env[e.name] = v
            result = self.exec(e.body, hint=hint)
            if saved is missing:
                del st.env[e.name]
            else:
                st.env[e.name] = saved
            return result
        if isinstance(e, Seq):
            self.exec(e.first)
            return self.exec(e.second, hint=hint)
        raise TypeError(f"not an expression: {e!r}")


@dataclass
class RunResult:
    value: object
    fault: RuntimeFault | None
    snapshots: list[Snapshot]
    state: ConcreteState

    @property
    def ok(self) -> bool:
        return self.fault is None


def _execute(program: Expr, checked: bool, traced: bool) -> RunResult:
    check_scopes(program)
    m = _Machine(checked, traced)
    try:
        value = m.exec(program)
    except RuntimeFault as fault:
        return RunResult(None, fault, m.snapshots, m.st)
    m.snapshot(program.span, "exit")
    return RunResult(value, None, m.snapshots, m.st)


def run(program: Expr, checked: bool = True):
    """Run ``program``; return its final value or raise RuntimeFault.

    ``checked=False`` drops the capability checks and only traps
    use-after-free, double free and dereferencing an integer.
    """
    result = _execute(program, checked, traced=False)
    if result.fault is not None:
        raise result.fault
    return result.value


def run_traced(program: Expr, checked: bool = True) -> RunResult:
    return _execute(program, checked, traced=True)
