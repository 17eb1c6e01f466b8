import random
from pathlib import Path

import pytest

from lambdapa.syntax import (
    Free, IntLit, Let, MutBorrow, New, Read, Seq, ShrBorrow, Var, Write, parse,
)

ROOT = Path(__file__).resolve().parent.parent
LISTINGS = ROOT / "programs" / "listings"
GOLDEN = Path(__file__).resolve().parent / "golden"

NAMES = ["x", "y", "z", "p", "q", "r0", "_t", "long_name_9"]


def load(name: str):
    text = (LISTINGS / f"{name}.lpa").read_text()
    return text, parse(text)


def random_ast(rng: random.Random, depth: int):
    """Arbitrary (not necessarily well-scoped) AST covering every node form."""
    if depth <= 0 or rng.random() < 0.15:
        if rng.random() < 0.5:
            return IntLit(rng.choice([0, 1, 42, -7, 10**30, rng.randrange(-1000, 1000)]))
        return Var(rng.choice(NAMES))
    kind = rng.randrange(8)
    sub = lambda: random_ast(rng, depth - 1)  # noqa: E731
    if kind == 0:
        return New(sub())
    if kind == 1:
        return Free(sub())
    if kind == 2:
        return Read(sub())
    if kind == 3:
        return Write(sub(), sub())
    if kind == 4:
        return MutBorrow(sub())
    if kind == 5:
        return ShrBorrow(sub())
    if kind == 6:
        return Let(rng.choice(NAMES), sub(), sub())
    return Seq(sub(), sub())


@pytest.fixture
def listing():
    return load
