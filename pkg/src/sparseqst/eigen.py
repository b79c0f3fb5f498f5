"""Ansatz eigenvectors of U_phi and the reduced 2x2 blocks that define them.

For every data bitstring s the subspace H^{(x)n}|s> (x) C^2 is mapped into
itself by U_phi. The restriction is a 2x2 unitary built from O(n) products of
4x4 transfer matrices; its two eigenvectors give the ancilla states alpha and
beta of the eigenpair attached to s.
"""

from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from . import uphi_fast as uf
from .circuit import DENSE_LIMIT, PhaseConfig, StateVector, uphi_dense

TWO_PI = 2 * np.pi
STRUCTURE_TOL = 1e-8
SOLVE_TOL = 1e-9
GAUGE_TOL = 1e-12
DISTINCT_TOL = 1e-6


class DegenerateBlockError(ArithmeticError):
    def __init__(self, message: str, residuals: dict):
        super().__init__(f"{message}: {residuals}")
        self.residuals = residuals


@dataclass(frozen=True)
class AnsatzIndex:
    """Period exponent ``m`` and pattern bits ``s = (s_1, ..., s_{m-1})``."""

    m: int
    s: tuple[int, ...] = ()

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("m must be >= 1")
        if len(self.s) != self.m - 1:
            raise ValueError(f"m={self.m} needs {self.m - 1} pattern bits, got {len(self.s)}")
        if self.m >= 2 and self.s[-1] != 1:
            raise ValueError("leading pattern bit s_{m-1} must be 1")
        if any(b not in (0, 1) for b in self.s):
            raise ValueError("pattern bits must be 0 or 1")

    @classmethod
    def from_int(cls, value: int) -> "AnsatzIndex":
        """Index for the n-bit data string whose integer value is ``value``."""
        if value < 0:
            raise ValueError("value must be non-negative")
        m = value.bit_length() + 1
        return cls(m, tuple((value >> i) & 1 for i in range(m - 1)))

    def to_int(self) -> int:
        return sum(b << i for i, b in enumerate(self.s))

    def bits(self, n: int) -> str:
        return format(self.to_int(), f"0{n}b")


def enumerate_indices(n: int) -> Iterator[AnsatzIndex]:
    for value in range(1 << n):
        yield AnsatzIndex.from_int(value)


def dual(alpha: Sequence[complex]) -> np.ndarray:
    """(a0 + i b0, a1) -> (a1, -a0 + i b0) for real a1.

    For a general pair this is (conj(alpha_1), -conj(alpha_0)), the
    orthogonal complement in C^2; the form above is what it reduces to in
    the alpha_1-real gauge.
    """
    a0, a1 = complex(alpha[0]), complex(alpha[1])
    return np.array([a1.conjugate(), -a0.conjugate()])


def fix_gauge(v: Sequence[complex]) -> np.ndarray:
    """Make v[1] real and non-negative (or v[0] when v[1] vanishes)."""
    v = np.asarray(v, dtype=complex)
    r = 1 if abs(v[1]) > GAUGE_TOL else 0
    out = v * np.exp(-1j * np.angle(v[r]))
    out[r] = abs(v[r])
    return out


def ansatz_state(idx: AnsatzIndex, alpha: Sequence[complex], n: int) -> StateVector:
    """H^{(x)n}|0..0 s_{m-1} .. s_1> (x) (alpha_0|0> + alpha_1|1>)."""
    if idx.m > n + 1:
        raise ValueError(f"m={idx.m} too large for n={n}")
    if abs(abs(alpha[0]) ** 2 + abs(alpha[1]) ** 2 - 1) > 1e-10:
        raise ValueError("alpha must be normalized")
    x = np.arange(1 << n)
    parity = (np.bitwise_count(x & idx.to_int()) & 1).astype(np.int64)
    data = (1 - 2 * parity) / 2 ** (n / 2)
    amps = np.outer(data, np.asarray(alpha, dtype=complex)).reshape(-1)
    return StateVector(n + 1, amps)


# -- transfer-matrix products ----------------------------------------------------


def _stage_sum(stage: int, cfg: PhaseConfig, sign: int = 1) -> np.ndarray:
    """M_{stage,0,0} + sign * M_{stage,1,0}."""
    return uf.stage_matrix(stage, 0, 0, cfg) + sign * uf.stage_matrix(stage, 1, 0, cfg)


def k_product(a: int, cfg: PhaseConfig) -> np.ndarray:
    """Sum over detector input bits of the first ``a`` transfer matrices.

    The sum factorises stage by stage. Stage n uses the closing form that
    folds in the last splitter and phi_{n+1}.
    """
    if not 0 <= a <= cfg.n:
        raise ValueError(f"a must be in [0, {cfg.n}]")
    out = np.eye(4)
    for l in range(1, a + 1):
        out = _stage_sum(l, cfg) @ out
    return out


def v_matrix(idx: AnsatzIndex, cfg: PhaseConfig) -> np.ndarray:
    n, m = cfg.n, idx.m
    if m > n + 1:
        raise ValueError(f"m={m} too large for n={n}")
    out = k_product(n - m + 1, cfg)
    for l in range(1, m):
        a = m - l
        out = _stage_sum(n - a + 1, cfg, -1 if idx.s[a - 1] else 1) @ out
    return out


@dataclass(frozen=True)
class RhoBlock:
    """rho[j0, k0] plus the angle parametrisation used for the duality check."""

    index: AnsatzIndex
    n: int
    rho: np.ndarray
    omega: float
    gamma00: float
    gamma01: float
    gamma10: float
    structure_residual: float
    conforming: bool

    def reduced(self) -> np.ndarray:
        """R[k0, j0] = (sqrt 2)^n rho[j0, k0], the action of U_phi on alpha."""
        return 2 ** (self.n / 2) * self.rho.T

    def model_rho(self) -> np.ndarray:
        """rho rebuilt from (omega, gammas) with the (1,1) phase tied to the others."""
        c, s = np.cos(self.omega), np.sin(self.omega)
        g00, g01, g10 = self.gamma00, self.gamma01, self.gamma10
        return np.array(
            [
                [c * np.exp(1j * g00), s * np.exp(1j * g01)],
                [s * np.exp(1j * g10), c * np.exp(1j * (g01 + g10 - g00 - np.pi))],
            ]
        ) / 2 ** (self.n / 2)


def rho_block(idx: AnsatzIndex, cfg: PhaseConfig) -> RhoBlock:
    n = cfg.n
    V = v_matrix(idx, cfg)
    rho = np.array(
        [[uf.U_OUT[k0] @ V @ uf.V_IN[j0] for k0 in (0, 1)] for j0 in (0, 1)]
    ) / (2**n * np.sqrt(2))
    scale = 2 ** (n / 2)
    omega = float(np.arctan2(scale * abs(rho[1, 0]), scale * abs(rho[0, 0])))
    g00, g01, g10 = (float(np.angle(rho[i, j])) for i, j in ((0, 0), (0, 1), (1, 0)))
    block = RhoBlock(idx, n, rho, omega, g00, g01, g10, 0.0, True)
    resid = float(np.abs(block.model_rho() - rho).max() * scale)
    return RhoBlock(idx, n, rho, omega, g00, g01, g10, resid, resid <= STRUCTURE_TOL)


@dataclass(frozen=True)
class EigenPair:
    index: AnsatzIndex
    alpha: np.ndarray
    beta: np.ndarray
    lambda1: float
    lambda2: float
    beta_phase: float
    residuals: dict = field(default_factory=dict)

    @property
    def a0(self) -> float:
        return float(self.alpha[0].real)

    @property
    def b0(self) -> float:
        return float(self.alpha[0].imag)

    @property
    def a1(self) -> float:
        return float(self.alpha[1].real)

    def vectors(self, n: int) -> tuple[StateVector, StateVector]:
        return ansatz_state(self.index, self.alpha, n), ansatz_state(self.index, self.beta, n)


def polynomial_residuals(rho: np.ndarray, n: int, v: Sequence[complex]) -> np.ndarray:
    """Left-hand sides of the four equalities whose common root is an eigenvector.

    Returns [|row0|^2 eq, |row1|^2 eq, cross eq (abs), norm eq, b0*b1].
    """
    a = np.asarray(v, dtype=complex)
    rows = [rho[0, k] * a[0] + rho[1, k] * a[1] for k in (0, 1)]
    mag = [abs(rows[k]) ** 2 - abs(a[k]) ** 2 / 2**n for k in (0, 1)]
    cross = a[1] * rows[0] - a[0] * rows[1]
    return np.array(
        [mag[0], mag[1], abs(cross), abs(a[0]) ** 2 + abs(a[1]) ** 2 - 1, a[0].imag * a[1].imag]
    )


def solve_pair(block: RhoBlock, n: int | None = None, tol: float = SOLVE_TOL) -> EigenPair:
    """Eigenpair of the reduced block, alpha first (smaller eigenphase).

    beta is stored in the exact dual form of alpha; the phase between it and
    the raw eigensolver vector is kept in ``beta_phase``.
    """
    n = block.n if n is None else n
    R = block.reduced()
    normality = float(np.abs(R @ R.conj().T - R.conj().T @ R).max())
    unitarity = float(np.abs(R.conj().T @ R - np.eye(2)).max())
    if normality > tol or unitarity > tol:
        raise DegenerateBlockError(
            "reduced block is not unitary", {"normality": normality, "unitarity": unitarity}
        )
    w, vecs = np.linalg.eig(R)
    phases = np.mod(np.angle(w), TWO_PI)
    order = np.argsort(phases)
    alpha = fix_gauge(vecs[:, order[0]] / np.linalg.norm(vecs[:, order[0]]))
    beta = dual(alpha)
    lam1 = float(np.mod(np.angle(alpha.conj() @ R @ alpha), TWO_PI))
    lam2 = float(np.mod(np.angle(beta.conj() @ R @ beta), TWO_PI))
    raw2 = vecs[:, order[1]] / np.linalg.norm(vecs[:, order[1]])
    overlap = beta.conj() @ raw2
    res = {
        "eigen_alpha": float(np.abs(R @ alpha - np.exp(1j * lam1) * alpha).max()),
        "eigen_beta": float(np.abs(R @ beta - np.exp(1j * lam2) * beta).max()),
        "duality": float(abs(1 - abs(overlap))),
        "poly_alpha": float(np.abs(polynomial_residuals(block.rho, n, alpha)).max()),
        "poly_beta": float(np.abs(polynomial_residuals(block.rho, n, beta)).max()),
    }
    return EigenPair(block.index, alpha, beta, lam1, lam2, float(np.angle(overlap)), res)


# -- Appendix-B residuals ----------------------------------------------------------


def e_residuals(mu: Sequence[float], omega: float, g00: float, g01: float, g10: float) -> np.ndarray:
    """E_1 .. E_10 for mu = (a0, b0, a1) in the b1 = 0 gauge."""
    m0, m1, m2 = mu
    s, c = np.sin(omega), np.cos(omega)
    s2 = np.sin(2 * omega)
    cos, sin = np.cos, np.sin
    sum_cos = cos(2 * g00) + cos(g01 + g10)
    sum_sin = sin(2 * g00) + sin(g01 + g10)
    quad = m0**2 + m1**2 - m2**2
    e1 = m2 * s2 * (m0 * cos(g00 - g10) - m1 * sin(g00 - g10)) - s**2 * quad
    e2 = s**2 * quad + m2 * s2 * (m1 * sin(g00 - g10) - m0 * cos(g00 - g10))
    e3 = s * ((m1**2 - m0**2) * cos(g00 + g01) + 2 * m0 * m1 * sin(g00 + g01) + m2**2 * cos(g00 + g10)) \
        + m2 * c * (m0 * sum_cos - m1 * sum_sin)
    e4 = s * ((m1**2 - m0**2) * sin(g00 + g01) - 2 * m0 * m1 * cos(g00 + g01) + m2**2 * sin(g00 + g10)) \
        + m2 * c * (m0 * sum_sin + m1 * sum_cos)
    e5 = m0**2 + m1**2 + m2**2 - 1
    e8 = s * ((m1**2 - m0**2) * cos(g00 + g10) - 2 * m0 * m1 * sin(g00 + g10) + m2**2 * cos(g00 + g01)) \
        + m2 * c * (m0 * sum_cos + m1 * sum_sin)
    e9 = s * ((m1**2 - m0**2) * sin(g00 + g10) + 2 * m0 * m1 * cos(g00 + g10) + m2**2 * sin(g00 + g01)) \
        + m2 * c * (m0 * sum_sin - m1 * sum_cos)
    return np.array([e1, e2, e3, e4, e5, -e1, -e2, e8, e9, e5])


def unitarity_residuals(rho: np.ndarray, n: int) -> np.ndarray:
    """E_11 .. E_14 (E_14 as a magnitude)."""
    r = rho
    return np.array(
        [
            abs(r[0, 0]) ** 2 + abs(r[1, 0]) ** 2 - 1 / 2**n,
            abs(r[0, 0]) ** 2 + abs(r[0, 1]) ** 2 - 1 / 2**n,
            abs(r[0, 1]) ** 2 + abs(r[1, 1]) ** 2 - 1 / 2**n,
            abs(np.conj(r[0, 0]) * r[1, 0] + np.conj(r[0, 1]) * r[1, 1]),
        ]
    )


def omega_closed_form(mu: Sequence[float], g00: float, g01: float, g10: float) -> float:
    m0, m1, m2 = mu
    num = m2 * (m0 * (np.cos(2 * g00) + np.cos(g01 + g10)) - m1 * (np.sin(2 * g00) + np.sin(g01 + g10)))
    den = (m1**2 - m0**2) * np.cos(g00 + g01) + 2 * m0 * m1 * np.sin(g00 + g01) + m2**2 * np.cos(g00 + g10)
    return float(np.arctan(-num / den))


def mu0_closed_form(mu1: float, g01: float, g10: float) -> float:
    return float(-mu1 / np.tan((g01 - g10) / 2))


@dataclass(frozen=True)
class AppendixBCheck:
    residuals: np.ndarray  # E_1 .. E_14
    omega_error: float
    mu0_error: float
    ill_conditioned: bool


def _near_quarter_multiple(x: float, tol: float) -> bool:
    r = np.mod(x, np.pi / 2)
    return min(r, np.pi / 2 - r) < tol


def appendix_b_residuals(block: RhoBlock, mu: Sequence[float], cond_tol: float = 1e-6) -> AppendixBCheck:
    """All fourteen E residuals plus the closed-form cross-checks for omega and mu_0.

    ``omega_error`` compares tan(omega) modulo pi, since the closed form is an
    arctangent.
    """
    g00, g01, g10 = block.gamma00, block.gamma01, block.gamma10
    ill = _near_quarter_multiple(g00 + g01, cond_tol) or _near_quarter_multiple(g00 + g10, cond_tol)
    if ill:
        warnings.warn(
            "gamma00+gamma01 or gamma00+gamma10 is close to a multiple of pi/2; "
            "closed forms are ill-conditioned",
            RuntimeWarning,
            stacklevel=2,
        )
    res = np.concatenate(
        [e_residuals(mu, block.omega, g00, g01, g10), unitarity_residuals(block.rho, block.n)]
    )
    with np.errstate(divide="ignore", invalid="ignore"):
        om = omega_closed_form(mu, g00, g01, g10)
        d = np.mod(block.omega - om + np.pi / 2, np.pi) - np.pi / 2
        mu0 = mu0_closed_form(mu[1], g01, g10)
    return AppendixBCheck(res, float(abs(d)), float(abs(mu[0] - mu0)), ill)


# -- full spectrum -------------------------------------------------------------


@dataclass
class Spectrum:
    cfg: PhaseConfig
    pairs: dict[int, EigenPair]
    blocks: dict[int, RhoBlock]
    failures: dict[int, str]
    min_gap: float
    distinct: bool
    tol: float

    @property
    def conforming(self) -> bool:
        return not self.failures and all(b.conforming for b in self.blocks.values())

    def eigenphases(self) -> np.ndarray:
        return np.array([lam for p in self.pairs.values() for lam in (p.lambda1, p.lambda2)])

    def eigenvectors(self) -> tuple[np.ndarray, np.ndarray]:
        """Columns are the ansatz eigenvectors; second array holds their phases."""
        n = self.cfg.n
        cols, lams = [], []
        for pair in self.pairs.values():
            va, vb = pair.vectors(n)
            cols += [va.amps, vb.amps]
            lams += [pair.lambda1, pair.lambda2]
        return np.column_stack(cols), np.array(lams)


def circular_min_gap(phases: np.ndarray) -> float:
    if len(phases) < 2:
        return TWO_PI
    p = np.sort(np.mod(phases, TWO_PI))
    gaps = np.diff(np.concatenate([p, [p[0] + TWO_PI]]))
    return float(gaps.min())


def full_spectrum(cfg: PhaseConfig, tol: float = DISTINCT_TOL, max_n: int = DENSE_LIMIT) -> Spectrum:
    if cfg.n > max_n:
        raise ValueError(f"n={cfg.n} exceeds limit {max_n}")
    pairs, blocks, failures = {}, {}, {}
    for idx in enumerate_indices(cfg.n):
        key = idx.to_int()
        block = rho_block(idx, cfg)
        blocks[key] = block
        try:
            pairs[key] = solve_pair(block)
        except DegenerateBlockError as exc:
            failures[key] = str(exc)
    phases = np.array([lam for p in pairs.values() for lam in (p.lambda1, p.lambda2)])
    gap = circular_min_gap(phases)
    return Spectrum(cfg, pairs, blocks, failures, gap, gap > tol, tol)


# -- conjecture scan --------------------------------------------------------------


@dataclass
class ScanReport:
    n: int
    trials: int
    seed: int
    tol: float
    records: list[dict]

    @property
    def failures(self) -> list[dict]:
        return [r for r in self.records if not r["conforming"]]

    def summary(self) -> dict:
        if not self.records:
            return {"trials": 0, "conforming_fraction": None}
        keys = ("min_gap", "max_eigen_residual", "max_E_residual", "duality_residual", "gram_deviation")
        q = (0.0, 0.05, 0.5, 0.95, 1.0)
        out = {
            "trials": len(self.records),
            "conforming_fraction": sum(r["conforming"] for r in self.records) / len(self.records),
            "distinct_fraction": sum(r["min_gap"] > self.tol for r in self.records) / len(self.records),
        }
        for key in keys:
            vals = np.array([r[key] for r in self.records])
            out[key] = {f"q{int(p * 100):02d}": float(np.quantile(vals, p)) for p in q}
        return out

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "trials": self.trials,
            "seed": self.seed,
            "tol": self.tol,
            "records": self.records,
            "failures": [r["phis"] for r in self.failures],
            "summary": self.summary(),
        }


def check_spectrum(spec: Spectrum, U: np.ndarray | None = None) -> dict:
    """Dense-matrix checks of an ansatz spectrum."""
    cfg = spec.cfg
    if U is None:
        U = uphi_dense(cfg)
    V, lams = spec.eigenvectors()
    eig_res = float(np.abs(U @ V - V * np.exp(1j * lams)).max())
    gram = float(np.abs(V.conj().T @ V - np.eye(V.shape[1])).max())
    e_res = 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        for key, pair in spec.pairs.items():
            chk = appendix_b_residuals(spec.blocks[key], (pair.a0, pair.b0, pair.a1))
            e_res = max(e_res, float(np.abs(chk.residuals).max()))
    dual_res = max((p.residuals["duality"] for p in spec.pairs.values()), default=0.0)
    return {
        "max_eigen_residual": eig_res,
        "gram_deviation": gram,
        "max_E_residual": e_res,
        "duality_residual": float(dual_res),
    }


def _scan_trial(n: int, seed: int, trial: int, tol: float) -> dict:
    rng = np.random.default_rng([seed, trial])
    cfg = PhaseConfig.random(n, rng)
    spec = full_spectrum(cfg, tol)
    checks = check_spectrum(spec)
    conforming = (
        spec.conforming
        and spec.distinct
        and checks["max_eigen_residual"] < SOLVE_TOL
        and checks["duality_residual"] < SOLVE_TOL
        and checks["gram_deviation"] < STRUCTURE_TOL
    )
    return {"trial": trial, "phis": list(cfg.phis), "conforming": bool(conforming), "min_gap": spec.min_gap, **checks}


def conjecture_scan(n: int, trials: int, seed: int, tol: float = DISTINCT_TOL, workers: int = 1) -> ScanReport:
    """Random-phase survey of the ansatz eigenstructure.

    Trial ``i`` draws its phases from ``default_rng([seed, i])``, so serial and
    threaded runs give identical records.
    """
    if workers > 1 and trials > 1:
        with ThreadPoolExecutor(workers) as pool:
            records = list(pool.map(lambda i: _scan_trial(n, seed, i, tol), range(trials)))
    else:
        records = [_scan_trial(n, seed, i, tol) for i in range(trials)]
    return ScanReport(n, trials, seed, tol, records)
