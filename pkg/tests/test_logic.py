import itertools
from dataclasses import replace
from fractions import Fraction as F

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lambdapa.logic import (
    Int, PointsTo, RefEnd, RefId, ShiftError, SymState, ValueMismatch,
    apply_reference_end, conservation_violations, entails, frac_add, frac_half,
    make_frac, mutable_borrow, saturate_end, saturate_steps, shared_borrow,
    state_merge_pointsto,
)

x, y, z, w = RefId(0, "x"), RefId(1, "y"), RefId(2, "z"), RefId(3, "w")
V42 = Int(42)


def state(*chunks, cells=None):
    refs = set()
    for c in chunks:
        refs |= {c.ref} if isinstance(c, PointsTo) else {c.borrower, c.lender}
    lineage = cells or {r: 0 for r in refs}
    return state_merge_pointsto(SymState(chunks=tuple(chunks), lineage=lineage,
                                         live_cells=frozenset(lineage.values()),
                                         next_generation=10))


def chunks(s):
    return set(s.chunks)


# --- fractions ---

@pytest.mark.parametrize("f,half", [(F(1), F(1, 2)), (F(1, 2), F(1, 4)), (F(2, 3), F(1, 3))])
def test_frac_half(f, half):
    assert frac_half(f) == half


def test_frac_add():
    assert frac_add(F(1, 2), F(1, 4)) == F(3, 4)
    assert frac_add(F(3, 4), F(1, 4)) == 1
    with pytest.raises(OverflowError):
        frac_add(F(3, 4), F(1, 2))


def test_make_frac_range():
    assert make_frac(2, 4) == F(1, 2)
    with pytest.raises(ValueError):
        make_frac(0)
    with pytest.raises(ValueError):
        make_frac(3, 2)


dyadic = st.builds(lambda k, n: F(k, 2**n) if k <= 2**n else F(1),
                   st.integers(1, 64), st.integers(0, 8))


@given(dyadic, dyadic)
def test_frac_add_commutes(a, b):
    if a + b <= 1:
        assert frac_add(a, b) == frac_add(b, a)


@given(dyadic, dyadic, dyadic)
def test_frac_add_associates(a, b, c):
    if a + b + c <= 1:
        assert frac_add(frac_add(a, b), c) == frac_add(a, frac_add(b, c))


@given(dyadic)
def test_halves_sum_back(f):
    assert frac_add(frac_half(f), frac_half(f)) == f


# --- normalization ---

def test_merge_pointsto():
    s = SymState(chunks=(PointsTo(x, F(1, 2), V42), PointsTo(x, F(1, 2), V42)))
    assert state_merge_pointsto(s).chunks == (PointsTo(x, F(1), V42),)
    one = SymState(chunks=(PointsTo(x, F(1), V42),))
    assert state_merge_pointsto(one).chunks == one.chunks
    s = SymState(chunks=(PointsTo(x, F(1, 4), V42), PointsTo(x, F(1, 2), V42)))
    assert state_merge_pointsto(s).chunks == (PointsTo(x, frac_add(F(1, 4), F(1, 2)), V42),)


def test_merge_value_mismatch_is_internal_error():
    with pytest.raises(ValueMismatch):
        state_merge_pointsto(SymState(chunks=(PointsTo(x, F(1, 2), Int(1)), PointsTo(x, F(1, 2), Int(2)))))


# --- reference end ---

def test_reference_end_mutable():
    s = state(PointsTo(y, F(1), Int(43)), RefEnd(y, x, F(1)))
    assert chunks(apply_reference_end(s, y)) == {PointsTo(x, F(1), Int(43))}


def test_reference_end_shared():
    s = state(PointsTo(y, F(1, 2), V42), RefEnd(y, x, F(1, 2)), PointsTo(x, F(1, 4), V42))
    assert chunks(apply_reference_end(s, y)) == {PointsTo(x, F(3, 4), V42)}


def test_reference_end_missing():
    with pytest.raises(ShiftError) as info:
        apply_reference_end(state(PointsTo(y, F(1), Int(7))), y)
    assert info.value.kind == ShiftError.MISSING_REFEND


def test_reference_end_insufficient():
    s = state(PointsTo(y, F(1, 2), V42), PointsTo(z, F(1, 2), V42),
              RefEnd(y, x, F(1)), RefEnd(z, y, F(1, 2)))
    with pytest.raises(ShiftError) as info:
        apply_reference_end(s, y)
    assert info.value.kind == ShiftError.INSUFFICIENT_FRACTION


def test_reference_end_keeps_excess_borrower_fraction():
    s = state(PointsTo(y, F(1), V42), RefEnd(y, x, F(1, 2)))
    assert chunks(apply_reference_end(s, y)) == {PointsTo(y, F(1, 2), V42), PointsTo(x, F(1, 2), V42)}


def test_reference_end_shrinks_refends_by_one():
    s = state(PointsTo(y, F(1, 2), V42), RefEnd(y, x, F(1, 2)), PointsTo(x, F(1, 4), V42),
              PointsTo(z, F(1, 4), V42), RefEnd(z, x, F(1, 4)))
    assert len(apply_reference_end(s, z).refends()) == len(s.refends()) - 1


# --- saturation ---

def test_saturate_shared_listing_state():
    s = state(PointsTo(x, F(1, 4), V42), PointsTo(y, F(1, 2), V42), RefEnd(y, x, F(1, 2)),
              PointsTo(z, F(1, 4), V42), RefEnd(z, x, F(1, 4)))
    assert chunks(saturate_end(s, x, F(1))) == {PointsTo(x, F(1), V42)}


def test_saturate_noop_when_sufficient():
    s = state(PointsTo(x, F(1), V42))
    assert saturate_end(s, x, F(1)) == s
    assert saturate_steps(s, x, F(1)) == []


def _chain():
    # x lent to y mutably, y lent to z mutably
    return state(PointsTo(z, F(1), V42), RefEnd(z, y, F(1)), RefEnd(y, x, F(1)))


def _brute_force_end_orders(s, lender, needed):
    """Oracle: try every order of every subset of RefEnd applications."""
    borrowers = [r.borrower for r in s.refends()]
    good = []
    for k in range(len(borrowers) + 1):
        for order in itertools.permutations(borrowers, k):
            cur = s
            try:
                for b in order:
                    cur = apply_reference_end(cur, b)
            except ShiftError:
                continue
            if cur.frac_of(lender) >= needed:
                good.append((order, cur))
    return good


def test_nested_chain_ends_leaf_first():
    s = _chain()
    good = _brute_force_end_orders(s, x, F(1))
    assert [order for order, _ in good] == [(z, y)]
    steps = saturate_steps(s, x, F(1))
    assert [sh.borrower for sh, _ in steps] == [z, y]
    assert chunks(steps[-1][1]) == chunks(good[0][1]) == {PointsTo(x, F(1), V42)}


def test_saturation_agrees_with_brute_force_on_shared_tree():
    # x -> y (shared), y -> w (shared), x -> z (shared)
    s = state(PointsTo(x, F(1, 4), V42), PointsTo(y, F(1, 4), V42), PointsTo(w, F(1, 4), V42),
              PointsTo(z, F(1, 4), V42), RefEnd(y, x, F(1, 2)), RefEnd(w, y, F(1, 4)),
              RefEnd(z, x, F(1, 4)))
    good = _brute_force_end_orders(s, x, F(1))
    assert good
    finals = {frozenset(chunks(cur)) for _, cur in good}
    assert finals == {frozenset(chunks(saturate_end(s, x, F(1))))}
    order = [sh.borrower for sh, _ in saturate_steps(s, x, F(1))]
    assert tuple(order) in {o for o, _ in good}
    assert order.index(w) < order.index(y)


def test_saturate_prefers_never_used_newest_first():
    s = state(PointsTo(x, F(1, 4), V42), PointsTo(y, F(1, 2), V42), RefEnd(y, x, F(1, 2)),
              PointsTo(z, F(1, 4), V42), RefEnd(z, x, F(1, 4)))
    assert [sh.borrower for sh, _ in saturate_steps(s, x, F(1))] == [z, y]


def test_saturate_follows_program_use_order():
    s = state(PointsTo(x, F(1, 4), V42), PointsTo(y, F(1, 2), V42), RefEnd(y, x, F(1, 2)),
              PointsTo(z, F(1, 4), V42), RefEnd(z, x, F(1, 4)))
    s = replace(s, last_use={y: 0, z: 1})
    steps = saturate_steps(s, x, F(1))
    assert [sh.borrower for sh, _ in steps] == [y, z]
    assert steps[0][1].frac_of(x) == F(3, 4)


def test_saturate_stops_once_positive():
    s = state(PointsTo(y, F(1, 2), V42), PointsTo(z, F(1, 2), V42),
              RefEnd(y, x, F(1, 2)), RefEnd(z, x, F(1, 2)))
    steps = saturate_steps(s, x, None)
    assert len(steps) == 1


def test_saturate_unrecoverable():
    s = state(PointsTo(x, F(1, 2), V42), PointsTo(y, F(1, 2), V42))
    with pytest.raises(ShiftError) as info:
        saturate_end(s, x, F(1))
    assert info.value.kind == ShiftError.UNRECOVERABLE
    with pytest.raises(ShiftError):
        saturate_end(state(PointsTo(x, F(1), V42)), y, None)


# --- entailment ---

def test_entails():
    assert entails(state(PointsTo(x, F(1), V42)), [PointsTo(x, F(1, 2), V42)])
    assert not entails(state(PointsTo(x, F(1, 2), V42)), [PointsTo(x, F(1), V42)])
    s = state(PointsTo(x, F(3, 4), V42), PointsTo(z, F(1, 4), V42), RefEnd(z, x, F(1, 4)))
    assert entails(s, [PointsTo(x, F(3, 4), V42)])


def test_entails_splits_and_matches_values():
    s = state(PointsTo(x, F(1), V42), RefEnd(y, x, F(1, 2)))
    assert entails(s, [PointsTo(x, F(1, 2), V42), PointsTo(x, F(1, 2), V42)])
    assert not entails(s, [PointsTo(x, F(1, 2), Int(1))])
    assert entails(s, [RefEnd(y, x, F(1, 2))])
    assert not entails(s, [RefEnd(y, x, F(1, 2)), RefEnd(y, x, F(1, 2))])
    assert not entails(s, [RefEnd(y, x, F(1, 4))])


# --- rule round-trips and frame ---

@pytest.mark.parametrize("q", [F(1), F(1, 2), F(1, 4), F(3, 8)])
def test_shared_borrow_then_end_restores_lender(q):
    s = state(PointsTo(x, q, V42))
    borrowed = shared_borrow(s, x, y)
    assert chunks(borrowed) == {PointsTo(x, q / 2, V42), PointsTo(y, q / 2, V42), RefEnd(y, x, q / 2)}
    assert apply_reference_end(borrowed, y).chunks == s.chunks


def test_mutable_borrow_then_end_restores_lender():
    s = state(PointsTo(x, F(1), V42))
    borrowed = mutable_borrow(s, x, y)
    assert chunks(borrowed) == {PointsTo(y, F(1), V42), RefEnd(y, x, F(1))}
    assert apply_reference_end(borrowed, y).chunks == s.chunks


@pytest.mark.parametrize("q", [F(1, 2), F(1, 4), F(3, 8)])
def test_mutable_borrow_needs_full_permission(q):
    with pytest.raises(ValueError):
        mutable_borrow(state(PointsTo(x, q, V42)), x, y)


frame_refs = [RefId(100 + i, f"f{i}") for i in range(4)]
frame_chunk = st.one_of(
    st.builds(PointsTo, st.sampled_from(frame_refs), dyadic, st.integers(0, 9).map(Int)),
    st.builds(RefEnd, st.sampled_from(frame_refs[:2]), st.sampled_from(frame_refs[2:]), dyadic),
)


@settings(max_examples=200)
@given(st.lists(frame_chunk, max_size=5, unique_by=lambda c: (type(c), getattr(c, "ref", None) or c.borrower)),
       st.sampled_from([F(1), F(1, 2), F(1, 4), F(3, 8)]), st.booleans())
def test_reference_end_frame(frame, q, shared):
    base = state(PointsTo(x, q, V42))
    rule = mutable_borrow if q == 1 and not shared else shared_borrow
    s = rule(base, x, y)
    framed = s.with_chunks([*s.chunks, *frame])
    expected = apply_reference_end(s, y)
    assert apply_reference_end(framed, y).chunks == expected.with_chunks([*expected.chunks, *frame]).chunks


def test_conservation_checker():
    assert conservation_violations(state(PointsTo(x, F(1, 2), V42), PointsTo(y, F(1, 2), V42))) == {}
    assert conservation_violations(state(PointsTo(x, F(1, 2), V42))) == {0: F(1, 2)}
