"""``qst`` command-line entry point.

Exit codes: 0 success, 1 verification failure, 2 usage or I/O error.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import statistics
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .circuit import PhaseConfig, apply_uphi_circuit, new_basis_state, uphi_dense
from .eigen import DISTINCT_TOL, conjecture_scan
from .tomography import SparseState, TomographyConfig, random_sparse_state, reconstruct
from .uphi_fast import appendix_a_state, bit_reverse, uphi_element, uphi_element_reordered

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

# U_phi for n=1, phi=(0,0), assembled by hand from RX(-pi/2), CNOT and the
# phase gates (all trivial at phi=0).
GOLDEN_N1 = 0.5 * np.array(
    [
        [1, 1j, -1, 1j],
        [1j, -1, 1j, 1],
        [-1, 1j, 1, 1j],
        [1j, 1, 1j, -1],
    ]
)


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("QST_THREADS", "1")))
    except ValueError:
        return 1


def _emit(payload: dict, out: str | None) -> None:
    text = json.dumps(payload, indent=2) + "\n"
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _header(args: argparse.Namespace) -> dict:
    cfg = {k: v for k, v in vars(args).items() if k != "func"}
    return {"version": __version__, "command": args.command, "config": cfg, "seed": args.seed}


# -- subcommands -----------------------------------------------------------------


def cmd_gen_state(args: argparse.Namespace) -> int:
    rng = np.random.default_rng(args.seed)
    try:
        state = random_sparse_state(args.n, args.k, args.min_prob, rng)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    _emit(state.to_json(), args.out)
    return EXIT_OK


def verify_unitary(n: int, trials: int, seed: int, tol: float) -> dict:
    """Dense circuit vs element formulas vs path sums, plus the golden n=1 matrix."""
    rng = np.random.default_rng(seed)
    worst = {"element": 0.0, "element_detector_order": 0.0, "magnitude": 0.0, "path_sum": 0.0, "unitarity": 0.0}
    dim = 1 << (n + 1)
    for _ in range(trials):
        cfg = PhaseConfig.random(n, rng)
        U = uphi_dense(cfg)
        E = np.array([[uphi_element_reordered(k, j, cfg) for j in range(dim)] for k in range(dim)])
        F = np.array(
            [[uphi_element(bit_reverse(k, n + 1), bit_reverse(j, n + 1), cfg) for j in range(dim)] for k in range(dim)]
        )
        worst["element"] = max(worst["element"], float(np.abs(U - E).max()))
        worst["element_detector_order"] = max(worst["element_detector_order"], float(np.abs(U - F).max()))
        worst["magnitude"] = max(worst["magnitude"], float(np.abs(np.abs(U) - 2 ** (-(n + 1) / 2)).max()))
        worst["unitarity"] = max(worst["unitarity"], float(np.abs(U.conj().T @ U - np.eye(dim)).max()))
        thetas = [np.pi / 4] * (n + 1)
        pairs = [(0.0, p) for p in cfg.phis]
        for j in range(dim):
            wpd = [(j >> (n + 1 - k)) & 1 for k in range(1, n + 1)]
            q = (1, 0) if j & 1 == 0 else (0, 1)
            col = appendix_a_state(thetas, pairs, wpd, q).amps
            worst["path_sum"] = max(worst["path_sum"], float(np.abs(col - U[:, j]).max()))
    golden = float(np.abs(uphi_dense(PhaseConfig(1, (0.0, 0.0))) - GOLDEN_N1).max())
    checks = dict(worst, golden_n1=golden)
    return {"checks": checks, "passed": all(v < tol for v in checks.values())}


def cmd_verify_unitary(args: argparse.Namespace) -> int:
    result = verify_unitary(args.n, args.trials, args.seed, args.tol)
    _emit({**_header(args), **result}, args.out)
    return EXIT_OK if result["passed"] else EXIT_FAIL


def cmd_conjecture_scan(args: argparse.Namespace) -> int:
    report = conjecture_scan(args.n, args.trials, args.seed, args.tol, workers=_threads())
    payload = {**_header(args), **report.to_json()}
    _emit(payload, args.out)
    s = report.summary()
    if args.out:
        print(f"n={args.n} trials={args.trials} conforming_fraction={s['conforming_fraction']}")
    return EXIT_OK


def cmd_tomography(args: argparse.Namespace) -> int:
    rng = np.random.default_rng(args.seed)
    if args.state:
        try:
            truth = SparseState.load(args.state)
        except (OSError, ValueError, KeyError) as exc:
            print(f"error: cannot read state file {args.state}: {exc}", file=sys.stderr)
            return EXIT_USAGE
    else:
        if args.n is None:
            print("error: give --state or --n/--k", file=sys.stderr)
            return EXIT_USAGE
        try:
            truth = random_sparse_state(args.n, args.k, args.min_prob, rng)
        except ValueError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_USAGE
    cfg = PhaseConfig.random(truth.n, rng)
    tcfg = TomographyConfig(
        t=args.t,
        epsilon=args.epsilon,
        min_prob_hint=args.min_prob_hint,
        patience=args.patience,
        shots_mag=args.shots_mag,
        shots_phase=args.shots_phase,
        seed=args.seed,
    )
    report = reconstruct(truth, cfg, tcfg, rng)
    payload = {**_header(args), "truth": truth.to_json(), "report": report.to_json()}
    if args.out:
        _emit(payload, args.out)
    print(
        f"fidelity={report.fidelity:.6f} repetitions={report.repetitions} "
        f"settings={report.settings} support_exact={report.support_exact}",
        file=sys.stderr if not args.out else sys.stdout,
    )
    if not args.out:
        _emit(payload, None)
    return EXIT_OK if report.fidelity >= args.fidelity_threshold else EXIT_FAIL


def _time_ns(fn, reps: int, per_call: int = 1) -> tuple[float, float]:
    fn()
    samples = []
    for _ in range(reps):
        t0 = time.perf_counter_ns()
        fn()
        samples.append((time.perf_counter_ns() - t0) / per_call)
    return statistics.fmean(samples), statistics.stdev(samples) if reps > 1 else 0.0


def bench_rows(n_min: int, n_max: int, reps: int, dense_max: int, seed: int = 0, batch: int = 16) -> list[dict]:
    """Mean and stddev of wall time per call.

    Element timings average over ``batch`` random (k, j) pairs, because the
    cost of a stage depends on whether its input and output bits differ.
    """
    rng = np.random.default_rng(seed)
    rows = []
    for n in range(n_min, n_max + 1):
        cfg = PhaseConfig.random(n, rng)
        pairs = [(int(k), int(j)) for k, j in rng.integers(0, 1 << (n + 1), (batch, 2))]
        mean, sd = _time_ns(lambda: [uphi_element_reordered(k, j, cfg) for k, j in pairs], reps, batch)
        rows.append({"n": n, "op": "uphi_element", "mean_ns": mean, "stddev": sd})
        if n <= dense_max:
            state = new_basis_state(n + 1, pairs[0][1])
            mean, sd = _time_ns(lambda: apply_uphi_circuit(state, cfg), reps)
            rows.append({"n": n, "op": "dense_apply", "mean_ns": mean, "stddev": sd})
    return rows


def cmd_bench(args: argparse.Namespace) -> int:
    rows = bench_rows(args.n_min, args.n_max, args.reps, args.dense_max, args.seed)
    fh = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        if args.format == "csv":
            w = csv.DictWriter(fh, fieldnames=["n", "op", "mean_ns", "stddev"], lineterminator="\n")
            w.writeheader()
            for r in rows:
                w.writerow({**r, "mean_ns": f"{r['mean_ns']:.1f}", "stddev": f"{r['stddev']:.1f}"})
        else:
            fh.write(json.dumps({**_header(args), "rows": rows}, indent=2) + "\n")
    finally:
        if args.out:
            fh.close()
    return EXIT_OK


# -- parser ------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qst", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, seed=0):
        sp.add_argument("--seed", type=int, default=seed, help="RNG seed (default: %(default)s)")
        sp.add_argument("--out", help="output path (default: stdout)")

    g = sub.add_parser("gen-state", help="write a random K-sparse state as JSON")
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--k", type=int, required=True)
    g.add_argument("--min-prob", type=float, default=0.0, help="floor on |c_k|^2 (default: %(default)s)")
    common(g)
    g.set_defaults(func=cmd_gen_state)

    v = sub.add_parser("verify-unitary", help="check dense, element and path-sum constructions agree")
    v.add_argument("--n", type=int, default=3)
    v.add_argument("--trials", type=int, default=10)
    v.add_argument("--tol", type=float, default=1e-10, help="max entrywise deviation (default: %(default)s)")
    common(v)
    v.set_defaults(func=cmd_verify_unitary)

    c = sub.add_parser("conjecture-scan", help="random-phase survey of the eigenstructure")
    c.add_argument("--n", type=int, default=3)
    c.add_argument("--trials", type=int, default=100)
    c.add_argument("--tol", type=float, default=DISTINCT_TOL, help="eigenphase distinctness threshold (default: %(default)s)")
    common(c)
    c.set_defaults(func=cmd_conjecture_scan)

    t = sub.add_parser("tomography", help="run the two-phase reconstruction")
    t.add_argument("--state", help="SparseState JSON file; otherwise a state is generated")
    t.add_argument("--n", type=int)
    t.add_argument("--k", type=int, default=1)
    t.add_argument("--min-prob", type=float, default=0.0)
    t.add_argument("--t", type=int, default=8, help="phase precision bits (default: %(default)s)")
    t.add_argument("--epsilon", type=float, default=0.1, help="QPE failure budget (default: %(default)s)")
    t.add_argument("--shots-mag", type=int, default=100_000)
    t.add_argument("--shots-phase", type=int, default=100_000)
    t.add_argument("--patience", type=int, default=25, help="stop after this many reps without new support")
    t.add_argument("--min-prob-hint", type=float, default=None)
    t.add_argument("--fidelity-threshold", type=float, default=0.99)
    common(t)
    t.set_defaults(func=cmd_tomography)

    b = sub.add_parser("bench", help="timing table for element and dense evaluation")
    b.add_argument("--n-min", type=int, default=4)
    b.add_argument("--n-max", type=int, default=24)
    b.add_argument("--dense-max", type=int, default=14, help="largest n for the state-vector timing")
    b.add_argument("--reps", type=int, default=20)
    b.add_argument("--format", choices=["json", "csv"], default="csv")
    common(b)
    b.set_defaults(func=cmd_bench)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
