"""Monte-Carlo run of the full reconstruction on random sparse states.

    python3 scripts/reconstruct_demo.py --n 6 --k 4 --min-prob 0.05 --runs 100
"""

import argparse
import math

import numpy as np

from sparseqst.circuit import PhaseConfig
from sparseqst.tomography import TomographyConfig, random_sparse_state, reconstruct


def main() -> None:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--n", type=int, default=6)
    p.add_argument("--k", type=int, default=4)
    p.add_argument("--min-prob", type=float, default=0.05)
    p.add_argument("--t", type=int, default=8)
    p.add_argument("--epsilon", type=float, default=0.1)
    p.add_argument("--shots", type=int, default=100_000, help="shots per setting in phase 2")
    p.add_argument("--runs", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--no-hint", action="store_true", help="stop phase 1 by patience instead of the min-prob hint")
    args = p.parse_args()

    fids, exact, reps, bounds = [], 0, [], []
    for run in range(args.runs):
        rng = np.random.default_rng([args.seed, run])
        truth = random_sparse_state(args.n, args.k, args.min_prob, rng)
        cfg = PhaseConfig.random(args.n, rng)
        tcfg = TomographyConfig(
            t=args.t,
            epsilon=args.epsilon,
            min_prob_hint=None if args.no_hint else truth.min_prob(),
            shots_mag=args.shots,
            shots_phase=args.shots,
            seed=run,
        )
        rep = reconstruct(truth, cfg, tcfg, rng)
        fids.append(rep.fidelity)
        exact += rep.support_exact
        reps.append(rep.repetitions)
        bounds.append(3 * math.ceil(2 / truth.min_prob() - 1e-12))
    fids = np.array(fids)
    print(f"runs={args.runs} exact_support={exact} fidelity>=0.99: {int((fids >= 0.99).sum())}")
    print(f"fidelity min={fids.min():.5f} median={np.median(fids):.5f}")
    print(f"phase-1 repetitions median={np.median(reps):.0f} max={max(reps)}; runs over 3*ceil(2/min): "
          f"{sum(r > b for r, b in zip(reps, bounds))}")


if __name__ == "__main__":
    main()
