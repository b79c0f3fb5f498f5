"""Element and dense-apply timings with a power-law fit of the element cost.

    python3 scripts/bench_scaling.py --n-max 24 --out results/bench.csv
"""

import argparse
import csv
from pathlib import Path

import numpy as np
from scipy import stats

from sparseqst.cli import bench_rows


def main() -> None:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--n-min", type=int, default=4)
    p.add_argument("--n-max", type=int, default=24)
    p.add_argument("--dense-max", type=int, default=14)
    p.add_argument("--reps", type=int, default=30)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, default=Path("results/bench.csv"))
    args = p.parse_args()

    rows = bench_rows(args.n_min, args.n_max, args.reps, args.dense_max, args.seed)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    with args.out.open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=["n", "op", "mean_ns", "stddev"], lineterminator="\n")
        w.writeheader()
        w.writerows(rows)

    elem = [(r["n"], r["mean_ns"]) for r in rows if r["op"] == "uphi_element" and r["n"] >= 8]
    if len(elem) >= 3:
        ns, ts = np.array(elem).T
        exponent = stats.theilslopes(np.log(ts), np.log(ns))[0]
        print(f"uphi_element: time ~ n^{exponent:.2f}")
    dense = {r["n"]: r["mean_ns"] for r in rows if r["op"] == "dense_apply"}
    for n in sorted(dense):
        if n - 1 in dense:
            print(f"dense_apply n={n}: ratio to n-1 = {dense[n] / dense[n - 1]:.2f}")
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
