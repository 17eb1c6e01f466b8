"""Verifier and runtime monitor for Rust-style pointer aliasing in the λ_PA mini-language."""

from .logic import (
    Fraction,
    PointsTo,
    RefEnd,
    RefId,
    SymState,
    apply_reference_end,
    entails,
    frac_add,
    frac_half,
    saturate_end,
    state_merge_pointsto,
)
from .monitor import RuntimeFault, run, run_traced
from .syntax import ParseError, ScopeError, check_scopes, parse, pretty
from .verifier import Accepted, Rejected, explain, sym_exec, verify

__all__ = [
    "Accepted", "Fraction", "ParseError", "PointsTo", "RefEnd", "RefId", "Rejected",
    "RuntimeFault", "ScopeError", "SymState", "apply_reference_end", "check_scopes",
    "entails", "explain", "frac_add", "frac_half", "parse", "pretty", "run",
    "run_traced", "saturate_end", "state_merge_pointsto", "sym_exec", "verify",
]
