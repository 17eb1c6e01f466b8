"""Resource algebra: fractions, chunks, symbolic states and the reference-end shift.

A symbolic state is a normalized multiset of chunks:

* ``PointsTo(r, q, v)``: reference ``r`` owns fraction ``q`` of a cell holding ``v``;
* ``RefEnd(b, l, q)``: fraction ``q`` may flow from borrower ``b`` back to lender ``l``.

Ending a borrow consumes the ``RefEnd`` together with ``q`` of the borrower's
fraction and hands ``q`` to the lender. ``saturate_end`` chains such shifts
until a lender holds a required fraction.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Iterable, Mapping, Union

ONE = Fraction(1)


# --- fractions -----------------------------------------------------------


def make_frac(num: int, den: int = 1) -> Fraction:
    f = Fraction(num, den)
    if not 0 < f <= 1:
        raise ValueError(f"permission fraction out of (0, 1]: {f}")
    return f


def frac_half(f: Fraction) -> Fraction:
    return f / 2


def frac_add(a: Fraction, b: Fraction) -> Fraction:
    total = a + b
    if total > 1:
        raise OverflowError(f"fraction sum {a} + {b} exceeds 1")
    return total


def format_frac(f: Fraction) -> str:
    return f"{f.numerator}/{f.denominator}"


def parse_frac(text: str) -> Fraction:
    num, _, den = text.partition("/")
    return make_frac(int(num), int(den or 1))


# --- values and chunks ---------------------------------------------------


@dataclass(frozen=True, order=True)
class RefId:
    generation: int
    display_name: str = field(compare=False)

    def __str__(self) -> str:
        return self.display_name


@dataclass(frozen=True)
class Int:
    value: int

    def __str__(self) -> str:
        return str(self.value)


@dataclass(frozen=True)
class Ref:
    id: RefId

    def __str__(self) -> str:
        return f"&{self.id}"


SymValue = Union[Int, Ref]


@dataclass(frozen=True)
class PointsTo:
    ref: RefId
    frac: Fraction
    value: SymValue

    def __str__(self) -> str:
        sub = "" if self.frac == 1 else f"_{format_frac(self.frac)}"
        return f"{self.ref} |->{sub} {self.value}"


@dataclass(frozen=True)
class RefEnd:
    borrower: RefId
    lender: RefId
    frac: Fraction

    def __post_init__(self):
        if self.borrower == self.lender:
            raise ValueError("a reference cannot lend to itself")

    def __str__(self) -> str:
        sub = "" if self.frac == 1 else f"_{format_frac(self.frac)}"
        return f"{self.borrower} refend{sub} {self.lender}"


Chunk = Union[PointsTo, RefEnd]


def _chunk_key(c: Chunk):
    if isinstance(c, PointsTo):
        return (0, c.ref.generation, 0, c.frac)
    return (1, c.borrower.generation, c.lender.generation, c.frac)


class ShiftError(Exception):
    """A view shift could not be applied."""

    MISSING_REFEND = "MissingRefEnd"
    INSUFFICIENT_FRACTION = "InsufficientFraction"
    UNRECOVERABLE = "Unrecoverable"

    def __init__(self, kind: str, ref: RefId, message: str = ""):
        self.kind = kind
        self.ref = ref
        super().__init__(message or f"{kind}: {ref}")


class ValueMismatch(Exception):
    """Two chunks for one reference disagree on the value; an internal bug."""


@dataclass(frozen=True)
class Shift:
    borrower: RefId
    lender: RefId
    frac: Fraction


# --- symbolic state ------------------------------------------------------


@dataclass(frozen=True)
class SymState:
    chunks: tuple[Chunk, ...] = ()
    env: Mapping[str, SymValue] = field(default_factory=dict)
    lineage: Mapping[RefId, int] = field(default_factory=dict)
    next_generation: int = 0
    live_cells: frozenset[int] = frozenset()
    # step index of the most recent access through each reference; orders sibling ends
    last_use: Mapping[RefId, int] = field(default_factory=dict)
    clock: int = 0

    def pointsto(self, ref: RefId) -> PointsTo | None:
        for c in self.chunks:
            if isinstance(c, PointsTo) and c.ref == ref:
                return c
        return None

    def frac_of(self, ref: RefId) -> Fraction:
        c = self.pointsto(ref)
        return c.frac if c is not None else Fraction(0)

    def refends(self) -> list[RefEnd]:
        return [c for c in self.chunks if isinstance(c, RefEnd)]

    def with_chunks(self, chunks: Iterable[Chunk]) -> "SymState":
        return state_merge_pointsto(replace(self, chunks=tuple(chunks)))

    def __str__(self) -> str:
        return "{ " + " &*& ".join(str(c) for c in self.chunks) + " }" if self.chunks else "{ }"


def state_merge_pointsto(s: SymState) -> SymState:
    """Normalize: combine same-reference PointsTo chunks and sort canonically."""
    merged: dict[RefId, PointsTo] = {}
    rest: list[Chunk] = []
    for c in s.chunks:
        if not isinstance(c, PointsTo):
            rest.append(c)
            continue
        prev = merged.get(c.ref)
        if prev is None:
            merged[c.ref] = c
        elif prev.value != c.value:
            raise ValueMismatch(f"{prev} vs {c}")
        else:
            merged[c.ref] = PointsTo(c.ref, frac_add(prev.frac, c.frac), c.value)
    chunks = sorted([*merged.values(), *rest], key=_chunk_key)
    return replace(s, chunks=tuple(chunks))


def _take(chunks: list[Chunk], ref: RefId, amount: Fraction) -> SymValue:
    for i, c in enumerate(chunks):
        if isinstance(c, PointsTo) and c.ref == ref:
            if c.frac < amount:
                break
            if c.frac == amount:
                del chunks[i]
            else:
                chunks[i] = PointsTo(ref, c.frac - amount, c.value)
            return c.value
    raise ShiftError(ShiftError.INSUFFICIENT_FRACTION, ref,
                     f"{ref} holds less than {format_frac(amount)}")


def apply_reference_end(s: SymState, borrower: RefId) -> SymState:
    """End one borrow: ``b |->_q v * refend(b, l, q)  ==>  l |->_q v``."""
    chunks = list(s.chunks)
    for i, c in enumerate(chunks):
        if isinstance(c, RefEnd) and c.borrower == borrower:
            refend = c
            del chunks[i]
            break
    else:
        raise ShiftError(ShiftError.MISSING_REFEND, borrower,
                         f"no reference-ending resource for {borrower}")
    value = _take(chunks, borrower, refend.frac)
    chunks.append(PointsTo(refend.lender, refend.frac, value))
    return s.with_chunks(chunks)


def mutable_borrow(s: SymState, lender: RefId, borrower: RefId) -> SymState:
    """``{p |-> v}  &mut *p  {r |-> v * refend(r, p, 1)}``; lineage follows the lender."""
    chunk = s.pointsto(lender)
    if chunk is None or chunk.frac != 1:
        raise ValueError(f"mutable borrow needs {lender} |-> _ with full permission")
    rest = [c for c in s.chunks if c != chunk]
    s = replace(s, lineage={**s.lineage, borrower: s.lineage.get(lender)})
    return s.with_chunks(rest + [PointsTo(borrower, ONE, chunk.value), RefEnd(borrower, lender, ONE)])


def shared_borrow(s: SymState, lender: RefId, borrower: RefId) -> SymState:
    """``{p |->_q v}  &*p  {p |->_q/2 v * r |->_q/2 v * refend(r, p, q/2)}``."""
    chunk = s.pointsto(lender)
    if chunk is None:
        raise ValueError(f"shared borrow needs some permission for {lender}")
    half = frac_half(chunk.frac)
    rest = [c for c in s.chunks if c != chunk]
    s = replace(s, lineage={**s.lineage, borrower: s.lineage.get(lender)})
    return s.with_chunks(rest + [PointsTo(lender, half, chunk.value),
                                 PointsTo(borrower, half, chunk.value),
                                 RefEnd(borrower, lender, half)])


def _end_order(s: SymState, lender: RefId) -> list[RefEnd]:
    # Borrows never used end first, newest first; used ones in order of last use.
    def key(r: RefEnd):
        used = s.last_use.get(r.borrower)
        return (-1 if used is None else used, -r.borrower.generation)

    return sorted((r for r in s.refends() if r.lender == lender), key=key)


def saturate_steps(s: SymState, lender: RefId,
                   needed: Fraction | None) -> list[tuple[Shift, SymState]]:
    """Plan the reference-end shifts that give ``lender`` at least ``needed``.

    ``needed=None`` asks for any positive fraction. Returns each applied shift
    paired with the state right after it; raises ShiftError(Unrecoverable).
    """

    def enough(state: SymState, ref: RefId, want: Fraction | None) -> bool:
        have = state.frac_of(ref)
        return have > 0 if want is None else have >= want

    def recover(state, ref, want, visiting):
        steps: list[tuple[Shift, SymState]] = []
        if enough(state, ref, want):
            return steps
        for refend in _end_order(state, ref):
            b = refend.borrower
            if b in visiting:
                continue
            try:
                inner = recover(state, b, refend.frac, visiting | {b})
            except ShiftError:
                continue
            if inner:
                state = inner[-1][1]
            state = apply_reference_end(state, b)
            steps += inner
            steps.append((Shift(b, ref, refend.frac), state))
            if enough(state, ref, want):
                return steps
        wanted = "a positive fraction" if want is None else format_frac(want)
        raise ShiftError(ShiftError.UNRECOVERABLE, ref,
                         f"cannot recover {wanted} for {ref}")

    return recover(s, lender, needed, frozenset({lender}))


def saturate_end(s: SymState, lender: RefId, needed: Fraction | None = ONE) -> SymState:
    steps = saturate_steps(s, lender, needed)
    return steps[-1][1] if steps else s


def entails(s: SymState, goal: Iterable[Chunk]) -> bool:
    """Chunk matching modulo fraction splitting; unmatched chunks of ``s`` are dropped."""
    want: dict[RefId, tuple[Fraction, SymValue]] = {}
    refends: list[RefEnd] = []
    for c in goal:
        if isinstance(c, RefEnd):
            refends.append(c)
            continue
        prev = want.get(c.ref)
        if prev is not None and prev[1] != c.value:
            return False
        want[c.ref] = ((prev[0] if prev else 0) + c.frac, c.value)
    for ref, (frac, value) in want.items():
        have = s.pointsto(ref)
        if have is None or have.frac < frac or have.value != value:
            return False
    available = s.refends()
    for r in refends:
        if r not in available:
            return False
        available.remove(r)
    return True


def cell_fractions(s: SymState) -> dict[int, Fraction]:
    """Total PointsTo fraction held per live cell."""
    sums = {cell: Fraction(0) for cell in s.live_cells}
    for c in s.chunks:
        if isinstance(c, PointsTo):
            cell = s.lineage[c.ref]
            if cell in sums:
                sums[cell] += c.frac
    return sums


def conservation_violations(s: SymState) -> dict[int, Fraction]:
    """Live cells whose fractions do not sum to exactly one (empty when sound)."""
    return {cell: f for cell, f in cell_fractions(s).items() if f != 1}
