"""Two-phase reconstruction of K-sparse pure states.

Phase 1 finds the support by repeated phase estimation on the Hadamard
encoded state. Phase 2 estimates the coefficients: magnitudes from
computational-basis counts, relative phases from two interferometric
settings per support element on the span of that element and a reference.
"""

from __future__ import annotations

import json
import logging
import math
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import __version__
from .circuit import HADAMARD, PhaseConfig, StateVector, _apply_1q
from .eigen import EigenPair, Spectrum, circular_min_gap
from .qpe import QPEConfig, prepare_qpe

log = logging.getLogger(__name__)

SUPPORT_SAFETY = 3
DEFAULT_PATIENCE = 25


@dataclass(frozen=True)
class SparseState:
    n: int
    terms: tuple[tuple[str, complex], ...]

    def __post_init__(self):
        terms = tuple((str(b), complex(c)) for b, c in self.terms)
        object.__setattr__(self, "terms", terms)
        bits = [b for b, _ in terms]
        if len(set(bits)) != len(bits):
            raise ValueError("bitstrings must be distinct")
        for b, c in terms:
            if len(b) != self.n or set(b) - {"0", "1"}:
                raise ValueError(f"bad bitstring {b!r} for n={self.n}")
            if c == 0:
                raise ValueError("coefficients must be nonzero")
        norm = sum(abs(c) ** 2 for _, c in terms)
        if abs(norm - 1) > 1e-10:
            raise ValueError(f"coefficients are not normalized (sum |c|^2 = {norm})")

    @property
    def K(self) -> int:
        return len(self.terms)

    @property
    def support(self) -> set[str]:
        return {b for b, _ in self.terms}

    def coeff(self, bits: str) -> complex:
        return dict(self.terms).get(bits, 0j)

    def min_prob(self) -> float:
        return min(abs(c) ** 2 for _, c in self.terms)

    def to_dense(self) -> np.ndarray:
        amps = np.zeros(1 << self.n, dtype=complex)
        for b, c in self.terms:
            amps[int(b, 2)] = c
        return amps

    def overlap(self, other: "SparseState") -> complex:
        return sum(np.conj(c) * other.coeff(b) for b, c in self.terms)

    def fidelity(self, other: "SparseState") -> float:
        return float(abs(self.overlap(other)) ** 2)

    def times_phase(self, phase: float) -> "SparseState":
        f = np.exp(1j * phase)
        return SparseState(self.n, tuple((b, c * f) for b, c in self.terms))

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "terms": [{"bits": b, "re": c.real, "im": c.imag} for b, c in self.terms],
        }

    @classmethod
    def from_json(cls, data: dict) -> "SparseState":
        terms = tuple((t["bits"], complex(t["re"], t["im"])) for t in data["terms"])
        return cls(int(data["n"]), terms)

    @classmethod
    def load(cls, path: str | Path) -> "SparseState":
        return cls.from_json(json.loads(Path(path).read_text()))

    def dump(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2) + "\n")


def random_sparse_state(n: int, K: int, min_prob: float, rng: np.random.Generator) -> SparseState:
    """K distinct random bitstrings, probabilities >= min_prob, uniform phases."""
    if K < 1 or K > 1 << n:
        raise ValueError(f"K={K} not in [1, 2^{n}]")
    if min_prob < 0 or K * min_prob > 1 + 1e-12:
        raise ValueError(f"infeasible: K * min_prob = {K * min_prob} > 1")
    chosen: list[int] = []
    seen: set[int] = set()
    while len(chosen) < K:
        v = int(rng.integers(0, 1 << n))
        if v not in seen:
            seen.add(v)
            chosen.append(v)
    probs = min_prob + (1 - K * min_prob) * rng.dirichlet(np.ones(K))
    probs = probs / probs.sum()
    phases = rng.uniform(0, 2 * np.pi, K)
    terms = tuple(
        (format(v, f"0{n}b"), complex(np.sqrt(p) * np.exp(1j * th)))
        for v, p, th in zip(chosen, probs, phases)
    )
    return SparseState(n, terms)


@dataclass(frozen=True)
class TomographyConfig:
    t: int = 8
    epsilon: float = 0.1
    min_prob_hint: float | None = None
    patience: int = DEFAULT_PATIENCE
    shots_mag: int = 100_000
    shots_phase: int = 100_000
    seed: int = 0
    safety: int = SUPPORT_SAFETY
    max_t_increase: int = 2
    max_repetitions: int = 100_000

    def __post_init__(self):
        for name in ("t", "patience", "shots_mag", "shots_phase", "safety", "max_repetitions"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.min_prob_hint is not None and not 0 < self.min_prob_hint <= 1:
            raise ValueError("min_prob_hint must lie in (0, 1]")

    @property
    def qpe(self) -> QPEConfig:
        return QPEConfig(self.t, self.epsilon)


# -- encoding ---------------------------------------------------------------------


def _hadamard_data(amps: np.ndarray, n: int) -> np.ndarray:
    for q in range(1, n + 1):
        amps = _apply_1q(amps, q, HADAMARD)
    return amps


def prepare_encoded(truth: SparseState) -> StateVector:
    """sum_k c_k H^{(x)n}|s_k> (x) (|0> + |1>)/sqrt 2, ancilla on qubit 0."""
    n = truth.n
    amps = np.zeros(1 << (n + 1), dtype=complex)
    for b, c in truth.terms:
        base = int(b, 2) << 1
        amps[base] = c / np.sqrt(2)
        amps[base | 1] = c / np.sqrt(2)
    return StateVector(n + 1, _hadamard_data(amps, n))


def decompose_ancilla(pair: EigenPair) -> tuple[complex, complex]:
    """Weights of the pair's two eigenvectors in the |+> ancilla state."""
    b0, b1 = complex(pair.beta[0]), complex(pair.beta[1])
    return (b0 - b1) / np.sqrt(2), (b0 + b1.conjugate()) / np.sqrt(2)


def spectrum_pair(spectrum: Spectrum, bits: str) -> EigenPair:
    return spectrum.pairs[int(bits, 2)]


def repetition_budget(truth: SparseState, spectrum: Spectrum) -> tuple[float, int]:
    """Return (m, ceil(2 / min_k |c_k|^2)).

    m is the smallest, over support elements, of the more likely of the two
    QPE collapse probabilities |c_k|^2 |d_{k,l}|^2.
    """
    if not spectrum.conforming:
        raise ValueError("spectrum is not conforming")
    m = math.inf
    for b, c in truth.terms:
        d1, d2 = decompose_ancilla(spectrum_pair(spectrum, b))
        m = min(m, abs(c) ** 2 * max(abs(d1) ** 2, abs(d2) ** 2))
    pmin = truth.min_prob()
    assert m >= pmin / 2 - 1e-12
    return m, math.ceil(2 / pmin - 1e-12)


def suggest_t(truth: SparseState, spectrum: Spectrum, t_min: int = 1, t_max: int = 12) -> int:
    """Smallest t whose resolution 2 pi 2^-t is below a third of the minimum
    eigenphase gap among the support's eigenpairs."""
    phases = []
    for b in truth.support:
        p = spectrum_pair(spectrum, b)
        phases += [p.lambda1, p.lambda2]
    gap = circular_min_gap(np.array(phases))
    t = t_min
    while t < t_max and 2 * np.pi * 2.0**-t > gap / 3:
        t += 1
    return t


# -- phase 1 ------------------------------------------------------------------------


@dataclass
class SupportEstimate:
    found: set[str]
    phase_table: dict[str, list[int]]
    repetitions_used: int
    t: int
    t_tilde: int
    first_words: dict[str, int] = field(default_factory=dict)
    collisions: list[int] = field(default_factory=list)

    def t_bit_words(self, bits: str) -> list[int]:
        shift = self.t_tilde - self.t
        return [round_word(w, shift, self.t) for w in self.phase_table[bits]]

    def clusters(self, bits: str, min_fraction: float = 0.1) -> list[tuple[int, int]]:
        return phase_clusters(self.t_bit_words(bits), self.t, min_fraction)


def round_word(word: int, shift: int, t: int) -> int:
    """Round a t_tilde-bit word to t bits (circularly)."""
    return int(round(word / 2**shift)) % (1 << t)


def phase_clusters(words: Sequence[int], t: int, min_fraction: float = 0.1) -> list[tuple[int, int]]:
    """Group t-bit words into runs of circularly adjacent values.

    Returns ``(mode, count)`` for clusters holding at least ``min_fraction``
    of the observations (and at least one).
    """
    if not words:
        return []
    size = 1 << t
    counts = np.bincount(np.asarray(words) % size, minlength=size)
    occupied = np.flatnonzero(counts)
    if occupied.size == size:
        return [(int(np.argmax(counts)), int(counts.sum()))]
    # start scanning just after an empty slot so no run wraps around
    start = int((np.flatnonzero(counts == 0)[0] + 1) % size)
    clusters, run = [], []
    for off in range(size):
        w = (start + off) % size
        if counts[w]:
            run.append(w)
        elif run:
            clusters.append(run)
            run = []
    if run:
        clusters.append(run)
    total = counts.sum()
    out = []
    for run in clusters:
        c = int(counts[run].sum())
        if c >= max(1, min_fraction * total):
            out.append((int(run[int(np.argmax(counts[run]))]), c))
    return sorted(out, key=lambda mc: -mc[1])


def _find_collisions(est: SupportEstimate) -> list[int]:
    owner: dict[int, str] = {}
    hits = set()
    for bits in est.phase_table:
        for mode, _ in est.clusters(bits):
            if mode in owner and owner[mode] != bits:
                hits.add(mode)
            owner.setdefault(mode, bits)
    return sorted(hits)


def phase1_support(
    truth: SparseState,
    cfg: PhaseConfig,
    tcfg: TomographyConfig,
    rng: np.random.Generator,
    t: int | None = None,
) -> SupportEstimate:
    """Repeat QPE -> Hadamard on data -> data measurement until the stop rule.

    With ``min_prob_hint`` the loop runs ``safety * ceil(2 / hint)`` times;
    otherwise it stops after ``patience`` repetitions without a new bitstring.
    """
    n = truth.n
    qcfg = QPEConfig(tcfg.t if t is None else t, tcfg.epsilon)
    # every fresh copy of the encoded state is identical, so the pre-measurement
    # QPE state is built once and sampled per repetition
    estimator = prepare_qpe(prepare_encoded(truth), cfg, qcfg)
    if tcfg.min_prob_hint is not None:
        budget = tcfg.safety * math.ceil(2 / tcfg.min_prob_hint - 1e-12)
    else:
        budget = tcfg.max_repetitions

    table: dict[str, list[int]] = {}
    first: dict[str, int] = {}
    data_cache: dict[int, np.ndarray] = {}
    streak = reps = 0
    while reps < budget:
        word = int(rng.choice(estimator.probs.size, p=estimator.probs))
        if word not in data_cache:
            amps = _hadamard_data(estimator.collapse(word).amps, n)
            p = np.abs(amps.reshape(1 << n, 2)) ** 2
            p = p.sum(axis=1)
            data_cache[word] = p / p.sum()
        value = int(rng.choice(1 << n, p=data_cache[word]))
        bits = format(value, f"0{n}b")
        reps += 1
        if bits in table:
            table[bits].append(word)
            streak += 1
        else:
            table[bits] = [word]
            first[bits] = word
            streak = 0
        if tcfg.min_prob_hint is None and streak >= tcfg.patience:
            break
    est = SupportEstimate(set(table), table, reps, qcfg.t, qcfg.t_tilde, first)
    est.collisions = _find_collisions(est)
    return est


# -- phase 2 ------------------------------------------------------------------------


@dataclass
class CoefficientEstimate:
    bits: list[str]
    coeffs: list[complex]
    settings: int
    off_support_rate: float
    dropped: list[str]


def _probabilities(truth: SparseState, bits: Iterable[str]) -> np.ndarray:
    p = np.array([abs(truth.coeff(b)) ** 2 for b in bits])
    return np.append(p, max(0.0, 1 - p.sum()))


def phase2_coefficients(
    truth: SparseState,
    support: Iterable[str],
    tcfg: TomographyConfig,
    rng: np.random.Generator,
) -> CoefficientEstimate:
    """Estimate c_k on a known support.

    The reference for relative phases is the element with the largest
    estimated magnitude; its phase is fixed to zero.
    """
    bits = sorted(support)
    if not bits:
        return CoefficientEstimate([], [], 0, 0.0, [])
    # magnitudes: one computational-basis setting
    counts = rng.multinomial(tcfg.shots_mag, _probabilities(truth, bits))
    mags = np.sqrt(counts[:-1] / tcfg.shots_mag)
    off_rate = counts[-1] / tcfg.shots_mag
    dropped = [b for b, m in zip(bits, mags) if m == 0]
    for b in dropped:
        warnings.warn(f"support element {b} has zero estimated magnitude; dropped", RuntimeWarning, stacklevel=2)
    kept = [(b, m) for b, m in zip(bits, mags) if m > 0]
    kept.sort(key=lambda bm: -bm[1])
    if not kept:
        return CoefficientEstimate([], [], 1, off_rate, dropped)

    ref = kept[0][0]
    a_ref = truth.coeff(ref)
    coeffs = [complex(kept[0][1])]
    settings = 1
    N1 = tcfg.shots_phase
    for b, mag in kept[1:]:
        a_k = truth.coeff(b)
        est = []
        for rot in (1, 1j):
            # project onto (|ref> +- rot|b>)/sqrt2 and the complement of their span
            plus = abs(a_ref + np.conj(rot) * a_k) ** 2 / 2
            minus = abs(a_ref - np.conj(rot) * a_k) ** 2 / 2
            p = np.array([plus, minus, 0.0])
            p[2] = max(0.0, 1 - plus - minus)
            c = rng.multinomial(N1, p / p.sum())
            est.append((c[0] - c[1]) / N1)
            settings += 1
        # est[0] = 2 Re(conj(a_ref) a_k), est[1] = 2 Im(conj(a_ref) a_k)
        theta = np.arctan2(est[1], est[0])
        coeffs.append(complex(mag * np.exp(1j * theta)))
    norm = np.sqrt(sum(abs(c) ** 2 for c in coeffs))
    return CoefficientEstimate(
        [b for b, _ in kept], [c / norm for c in coeffs], settings, float(off_rate), dropped
    )


# -- end to end --------------------------------------------------------------------


@dataclass
class Report:
    estimate: SparseState | None
    fidelity: float
    support_exact: bool
    repetitions: int
    repetitions_total: int
    shots: int
    settings: int
    t_used: int
    collisions: list[int]
    config: dict
    phis: list[float]
    seed: int
    off_support_rate: float

    def to_json(self) -> dict:
        d = asdict(self)
        d["estimate"] = None if self.estimate is None else self.estimate.to_json()
        d["version"] = __version__
        return d


def reconstruct(
    truth: SparseState,
    cfg: PhaseConfig,
    tcfg: TomographyConfig,
    rng: np.random.Generator | None = None,
) -> Report:
    """Phase 1 then phase 2; fidelity is |<truth|estimate>|^2.

    ``repetitions`` counts the final phase-1 run; ``repetitions_total`` also
    includes any runs discarded for phase-word collisions.

    If two support elements share a dominant phase word, phase 1 is re-run
    with one more precision bit, up to ``max_t_increase`` times (and within
    the qubit cap). The union of all phase-1 supports is kept.
    """
    if rng is None:
        rng = np.random.default_rng(tcfg.seed)
    t = tcfg.t
    support: set[str] = set()
    reps = 0
    while True:
        est = phase1_support(truth, cfg, tcfg, rng, t=t)
        support |= est.found
        reps += est.repetitions_used
        qcfg_next = QPEConfig(t + 1, tcfg.epsilon)
        can_grow = (
            t - tcfg.t < tcfg.max_t_increase
            and truth.n + 1 + qcfg_next.t_tilde <= qcfg_next.qubit_cap
        )
        if not est.collisions or not can_grow:
            break
        log.info("phase words collide at t=%d: %s; retrying with t=%d", t, est.collisions, t + 1)
        t += 1

    coef = phase2_coefficients(truth, support, tcfg, rng)
    estimate = SparseState(truth.n, tuple(zip(coef.bits, coef.coeffs))) if coef.bits else None
    fid = truth.fidelity(estimate) if estimate is not None else 0.0
    return Report(
        estimate=estimate,
        fidelity=fid,
        support_exact=support == truth.support,
        repetitions=est.repetitions_used,
        repetitions_total=reps,
        shots=reps + tcfg.shots_mag + tcfg.shots_phase * (coef.settings - 1),
        settings=coef.settings,
        t_used=t,
        collisions=est.collisions,
        config=asdict(tcfg),
        phis=list(cfg.phis),
        seed=tcfg.seed,
        off_support_rate=coef.off_support_rate,
    )

