"""Differential fuzzing sweep over several seeds and depths, with timing."""

import argparse
import json
import time

from lambdapa.fuzz import DiffReport, GenConfig, differential


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2, 3])
    ap.add_argument("--depths", type=int, nargs="+", default=[4, 7, 10])
    ap.add_argument("--count", type=int, default=1000)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--json", help="write the merged report here")
    args = ap.parse_args()

    total = DiffReport()
    print(f"{'seed':>5} {'depth':>5} {'accepted':>9} {'rejected':>9} {'viol':>5} {'mism':>5} {'secs':>6}")
    for depth in args.depths:
        for seed in args.seeds:
            start = time.perf_counter()
            rep = differential(GenConfig(seed=seed, max_depth=depth), args.count, workers=args.workers)
            secs = time.perf_counter() - start
            print(f"{seed:>5} {depth:>5} {rep.accepted:>9} {rep.rejected:>9} "
                  f"{len(rep.soundness_violations):>5} {len(rep.trace_mismatches):>5} {secs:>6.2f}")
            total = total.merge(rep)
    print(f"total={total.total} violations={len(total.soundness_violations)} "
          f"mismatches={len(total.trace_mismatches)}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(total.to_json(), fh, indent=2)


if __name__ == "__main__":
    main()
