"""Fraction of generated programs containing at least one borrow, per generator depth."""

import argparse

from lambdapa.fuzz import GenConfig, borrow_ratio


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=1000)
    ap.add_argument("--depths", type=int, nargs="+", default=[2, 4, 7, 10])
    args = ap.parse_args()
    for depth in args.depths:
        ratio = borrow_ratio(range(1, args.n + 1), GenConfig(max_depth=depth))
        print(f"depth {depth:>2}: {ratio:.3f}")


if __name__ == "__main__":
    main()
