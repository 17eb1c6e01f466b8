"""Random generation of well-scoped λ_PA programs and verifier/monitor differential runs."""

from __future__ import annotations

import random
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable

from .monitor import run_traced
from .syntax import (
    Expr,
    Free,
    IntLit,
    Let,
    MutBorrow,
    New,
    Read,
    ScopeError,
    Seq,
    ShrBorrow,
    Var,
    Write,
    check_scopes,
    parse,
    pretty,
    walk,
)
from .tracefmt import run_document, verdict_document
from .verifier import Accepted, verify

DEFAULT_WEIGHTS = {
    "let": 6,
    "seq": 4,
    "new": 4,
    "read": 3,
    "write": 3,
    "free": 2,
    "mutborrow": 3,
    "shrborrow": 3,
    "int": 1,
    "nonref": 1,  # borrow/deref an integer variable or a nested read
}


@dataclass(frozen=True)
class GenConfig:
    seed: int = 0
    max_depth: int = 7
    max_allocs: int = 3
    weights: dict[str, int] = field(default_factory=lambda: dict(DEFAULT_WEIGHTS))

    def __post_init__(self):
        if self.weights.get("let", 0) <= 0 or self.weights.get("new", 0) <= 0:
            raise ValueError("weights for 'let' and 'new' must be positive")
        if any(w < 0 for w in self.weights.values()):
            raise ValueError("weights must be non-negative")

    def for_index(self, i: int) -> "GenConfig":
        return GenConfig(self.seed * 1_000_003 + i, self.max_depth, self.max_allocs, self.weights)


class _Gen:
    def __init__(self, cfg: GenConfig):
        self.cfg = cfg
        self.rng = random.Random(cfg.seed)
        self.allocs = 0
        self.names = 0

    def pick(self, kinds: list[str]) -> str:
        weights = [self.cfg.weights.get(k, 0) for k in kinds]
        if not any(weights):
            return kinds[0]
        return self.rng.choices(kinds, weights)[0]

    def fresh_name(self) -> str:
        # a small pool, so shadowing happens now and then
        self.names += 1
        if self.names > 3 and self.rng.random() < 0.1:
            return f"v{self.rng.randrange(self.names - 1)}"
        return f"v{self.names - 1}"

    def literal(self) -> IntLit:
        return IntLit(self.rng.randrange(100))

    def target(self, refs: list[str], ints: list[str]) -> Expr:
        if (ints or refs) and self.cfg.weights.get("nonref", 0) and self.rng.random() < 0.08:
            if ints and self.rng.random() < 0.5:
                return Var(self.rng.choice(ints))
            return Read(Var(self.rng.choice(refs))) if refs else Var(self.rng.choice(ints))
        return Var(self.rng.choice(refs))

    def value(self, refs: list[str], ints: list[str]) -> Expr:
        r = self.rng.random()
        if refs and r < 0.15:
            return Var(self.rng.choice(refs))
        if ints and r < 0.3:
            return Var(self.rng.choice(ints))
        return self.literal()

    def bound(self, refs, ints) -> tuple[Expr, bool]:
        """Right-hand side of a let; second item says whether it is a reference."""
        kinds = ["int"]
        if self.allocs < self.cfg.max_allocs:
            kinds.append("new")
        if refs:
            kinds += ["mutborrow", "shrborrow", "read"]
        kind = self.pick(kinds)
        if kind == "new":
            self.allocs += 1
            return New(self.value(refs, ints)), True
        if kind == "mutborrow":
            return MutBorrow(self.target(refs, ints)), True
        if kind == "shrborrow":
            return ShrBorrow(self.target(refs, ints)), True
        if kind == "read":
            return Read(self.target(refs, ints)), False
        return self.literal(), False

    def stmt(self, refs, ints) -> Expr:
        if not refs:
            return self.literal()
        kind = self.pick(["read", "write", "free", "mutborrow", "shrborrow"])
        t = self.target(refs, ints)
        if kind == "read":
            return Read(t)
        if kind == "write":
            return Write(t, self.value(refs, ints))
        if kind == "free":
            return Free(t)
        if kind == "mutborrow":
            return MutBorrow(t)
        return ShrBorrow(t)

    def expr(self, depth: int, refs: list[str], ints: list[str]) -> Expr:
        if depth <= 0:
            return self.literal()
        kind = self.pick(["let", "seq", "stmt"])
        if kind == "let":
            rhs, is_ref = self.bound(refs, ints)
            name = self.fresh_name()
            refs2 = [r for r in refs if r != name]
            ints2 = [i for i in ints if i != name]
            (refs2 if is_ref else ints2).append(name)
            return Let(name, rhs, self.expr(depth - 1, refs2, ints2))
        if kind == "seq":
            return Seq(self.stmt(refs, ints), self.expr(depth - 1, refs, ints))
        return self.stmt(refs, ints)


def gen_program(cfg: GenConfig) -> Expr:
    """A well-scoped random program, deterministic in ``cfg``."""
    return _Gen(cfg).expr(cfg.max_depth, [], [])


# --- differential testing ------------------------------------------------


@dataclass
class Violation:
    program: str
    verdict: str
    monitor: str
    shrunk: str = ""


@dataclass
class DiffReport:
    total: int = 0
    accepted: int = 0
    rejected: int = 0
    soundness_violations: list[Violation] = field(default_factory=list)
    trace_mismatches: list[dict] = field(default_factory=list)

    def merge(self, other: "DiffReport") -> "DiffReport":
        return DiffReport(
            self.total + other.total,
            self.accepted + other.accepted,
            self.rejected + other.rejected,
            self.soundness_violations + other.soundness_violations,
            self.trace_mismatches + other.trace_mismatches,
        )

    def to_json(self) -> dict:
        return {
            "total": self.total,
            "accepted": self.accepted,
            "rejected": self.rejected,
            "soundness_violations": [vars(v) for v in self.soundness_violations],
            "trace_mismatches": self.trace_mismatches,
        }


def _violates(program: Expr) -> bool:
    try:
        check_scopes(program)
    except ScopeError:
        return False
    return isinstance(verify(program), Accepted) and not run_traced(program).ok


def check_program(program: Expr, text: str | None = None) -> DiffReport:
    """Verify and monitor one program; classify the outcome."""
    if text is None:
        # re-parse so both sides report real source spans
        text = pretty(program)
        program = parse(text)
    verdict = verify(program)
    result = run_traced(program)
    report = DiffReport(total=1)
    if isinstance(verdict, Accepted):
        report.accepted = 1
        if not result.ok:
            shrunk = shrink(program, _violates)
            report.soundness_violations.append(
                Violation(text, "accepted", f"{result.fault.kind} at {result.fault.span}",
                          pretty(shrunk)))
            return report
        vdoc = verdict_document(verdict)["entries"]
        mdoc = run_document(result)["entries"]
        if vdoc != mdoc:
            report.trace_mismatches.append({"program": text, "issue": "trace differs"})
    else:
        report.rejected = 1
        if result.ok:
            report.trace_mismatches.append({
                "program": text, "issue": "verifier rejects, monitor runs clean",
                "reason": verdict.reason, "at": str(verdict.at)})
        elif result.fault.span != verdict.at:
            report.trace_mismatches.append({
                "program": text, "issue": "rejection sites differ",
                "verifier": str(verdict.at), "monitor": str(result.fault.span)})
    return report


def _check_range(args: tuple[GenConfig, int, int]) -> DiffReport:
    cfg, lo, hi = args
    report = DiffReport()
    for i in range(lo, hi):
        report = report.merge(check_program(gen_program(cfg.for_index(i))))
    return report


def differential(cfg: GenConfig, n: int, workers: int = 1) -> DiffReport:
    if n < 1:
        raise ValueError("n must be at least 1")
    if workers <= 1:
        return _check_range((cfg, 0, n))
    step = -(-n // workers)
    chunks = [(cfg, lo, min(lo + step, n)) for lo in range(0, n, step)]
    report = DiffReport()
    with ProcessPoolExecutor(workers) as pool:
        for part in pool.map(_check_range, chunks):
            report = report.merge(part)
    return report


def differential_corpus(paths: Iterable[Path]) -> DiffReport:
    report = DiffReport()
    for path in sorted(paths):
        text = Path(path).read_text(encoding="utf-8")
        report = report.merge(check_program(parse(text), text))
    return report


# --- shrinking -----------------------------------------------------------


def _substitute(e: Expr, name: str, repl: Expr) -> Expr:
    if isinstance(e, Var):
        return repl if e.name == name else e
    if isinstance(e, IntLit):
        return e
    if isinstance(e, Let):
        body = e.body if e.name == name else _substitute(e.body, name, repl)
        return Let(e.name, _substitute(e.bound, name, repl), body)
    fields = {k: _substitute(v, name, repl) for k, v in vars(e).items() if k != "span" and not isinstance(v, (str, int))}
    return type(e)(**fields)


def _candidates(e: Expr) -> Iterable[Expr]:
    """One-step reductions of ``e``, smallest first."""
    if isinstance(e, Seq):
        yield e.second
        yield e.first
    if isinstance(e, Let):
        yield e.body
        yield _substitute(e.body, e.name, e.bound)
    if isinstance(e, (Write,)):
        yield Read(e.target)
    if isinstance(e, (IntLit, Var)):
        return
    names = [k for k in vars(e) if k != "span" and not isinstance(getattr(e, k), (str, int))]
    for k in names:
        for smaller in _candidates(getattr(e, k)):
            fields = {n: getattr(e, n) for n in vars(e) if n != "span"}
            fields[k] = smaller
            yield type(e)(**fields)


def shrink(program: Expr, still_bad: Callable[[Expr], bool]) -> Expr:
    """Greedily apply reductions while ``still_bad`` keeps holding."""
    current = program
    improved = True
    while improved:
        improved = False
        for cand in _candidates(current):
            if still_bad(cand):
                current = cand
                improved = True
                break
    return current


def borrow_ratio(seeds: Iterable[int], cfg: GenConfig | None = None) -> float:
    """Share of generated programs containing at least one borrow node."""
    base = cfg or GenConfig()
    seeds = list(seeds)
    hits = 0
    for s in seeds:
        prog = gen_program(GenConfig(s, base.max_depth, base.max_allocs, base.weights))
        hits += any(isinstance(n, (MutBorrow, ShrBorrow)) for n in walk(prog))
    return hits / len(seeds)
