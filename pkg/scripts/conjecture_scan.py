"""Random-phase survey of the ansatz eigenstructure for several n.

Writes one JSON report per n and prints the summary table.

    python3 scripts/conjecture_scan.py --n 2 3 4 5 --trials 100 --out results
"""

import argparse
import json
import os
from pathlib import Path

from sparseqst import __version__
from sparseqst.eigen import DISTINCT_TOL, conjecture_scan


def main() -> None:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--n", type=int, nargs="+", default=[2, 3, 4, 5])
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tol", type=float, default=DISTINCT_TOL)
    p.add_argument("--out", type=Path, default=Path("results"))
    args = p.parse_args()

    workers = int(os.environ.get("QST_THREADS", "1"))
    args.out.mkdir(parents=True, exist_ok=True)
    print(f"{'n':>2} {'trials':>6} {'conforming':>10} {'gap>tol':>8} {'min gap q05':>12} {'max resid':>10}")
    for n in args.n:
        report = conjecture_scan(n, args.trials, args.seed, args.tol, workers=workers)
        data = {"version": __version__, **report.to_json()}
        (args.out / f"conjecture_scan_n{n}.json").write_text(json.dumps(data, indent=2) + "\n")
        s = report.summary()
        print(
            f"{n:>2} {args.trials:>6} {s['conforming_fraction']:>10.3f} {s['distinct_fraction']:>8.3f} "
            f"{s['min_gap']['q05']:>12.2e} {s['max_eigen_residual']['q100']:>10.1e}"
        )


if __name__ == "__main__":
    main()
