"""Verify and run the bundled listings, printing each verdict and x's fraction history."""

import argparse
from pathlib import Path

from lambdapa.monitor import run_traced
from lambdapa.syntax import parse
from lambdapa.logic import PointsTo
from lambdapa.verifier import Accepted, explain, verify

LISTINGS = Path(__file__).resolve().parent.parent / "programs" / "listings"


def x_fraction(state) -> str:
    held = [c.frac for c in state.chunks if isinstance(c, PointsTo) and c.ref.display_name == "x"]
    return str(held[0]) if held else "-"


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("dir", nargs="?", default=str(LISTINGS))
    args = ap.parse_args()
    for path in sorted(Path(args.dir).glob("*.lpa")):
        prog = parse(path.read_text())
        verdict = verify(prog)
        result = run_traced(prog)
        print(f"== {path.name}")
        print(explain(verdict))
        print("monitor:", "clean" if result.ok else f"{result.fault.kind} at line {result.fault.span.line}")
        if isinstance(verdict, Accepted):
            print("x fractions:", " -> ".join(x_fraction(e.state) for e in verdict.trace))
        print()


if __name__ == "__main__":
    main()
