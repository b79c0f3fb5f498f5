"""Exact simulation of textbook t-bit phase estimation on U_phi.

Layout of the joint register: data qubits 0..n (photon first), then the
t_tilde phase-register qubits. Register qubit j controls U^{2^j} and is read
as bit j of the outcome word.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .circuit import (
    PhaseConfig,
    ResourceLimitError,
    StateVector,
    check_unitary,
    uphi_dense,
    unitary_power,
)

QUBIT_CAP = 22


def register_size(t: int, epsilon: float) -> int:
    """Register width t + ceil(log2(2 + 1/(2 epsilon)))."""
    if t < 1:
        raise ValueError("t must be >= 1")
    if not 0 < epsilon < 1:
        raise ValueError("epsilon must lie in (0, 1)")
    return t + math.ceil(math.log2(2 + 1 / (2 * epsilon)))


@dataclass(frozen=True)
class QPEConfig:
    t: int
    epsilon: float
    qubit_cap: int = QUBIT_CAP

    @property
    def t_tilde(self) -> int:
        return register_size(self.t, self.epsilon)


@dataclass(frozen=True)
class QPEOutcome:
    phase_word: int
    t_tilde: int
    collapsed: StateVector

    @property
    def phase_estimate(self) -> float:
        return 2 * np.pi * self.phase_word / 2**self.t_tilde


def _register_view(state: StateVector, register: Sequence[int]) -> tuple[np.ndarray, list[int]]:
    """Tensor with the register axes last, ordered so register[j] is bit j."""
    if len(set(register)) != len(register):
        raise ValueError(f"duplicate qubits in register {list(register)}")
    N = state.num_qubits
    for q in register:
        if not 0 <= q < N:
            raise ValueError(f"qubit {q} out of range")
    # axis a of the C-order tensor holds qubit N-1-a
    reg_axes = [N - 1 - q for q in reversed(register)]
    rest = [a for a in range(N) if a not in reg_axes]
    t = np.transpose(state.amps.reshape([2] * N), rest + reg_axes)
    return t, rest + reg_axes


def _fourier(state: StateVector, register: Sequence[int], inverse: bool) -> StateVector:
    t, perm = _register_view(state, register)
    shape = t.shape
    r = len(register)
    flat = t.reshape(-1, 1 << r)
    if inverse:
        out = np.fft.fft(flat, axis=1, norm="ortho")
    else:
        out = np.fft.ifft(flat, axis=1, norm="ortho")
    out = np.transpose(out.reshape(shape), np.argsort(perm))
    return StateVector(state.num_qubits, out.reshape(-1))


def qft(state: StateVector, register: Sequence[int]) -> StateVector:
    """|x> -> 2^{-r/2} sum_y e^{2 pi i x y / 2^r} |y> on the listed qubits."""
    return _fourier(state, register, inverse=False)


def inverse_qft(state: StateVector, register: Sequence[int]) -> StateVector:
    return _fourier(state, register, inverse=True)


def measure_qubits(
    state: StateVector, qubits: Sequence[int], rng: np.random.Generator
) -> tuple[tuple[int, ...], StateVector]:
    """Born-rule sample of ``qubits``; returns the bits and the renormalised state."""
    if len(set(qubits)) != len(qubits):
        raise ValueError(f"duplicate qubits {list(qubits)}")
    idx = np.arange(state.dim)
    probs = np.abs(state.amps) ** 2
    key = np.zeros(state.dim, dtype=np.int64)
    for pos, q in enumerate(qubits):
        if not 0 <= q < state.num_qubits:
            raise ValueError(f"qubit {q} out of range")
        key |= ((idx >> q) & 1) << pos
    marg = np.bincount(key, weights=probs, minlength=1 << len(qubits))
    outcome = int(rng.choice(marg.size, p=marg / marg.sum()))
    amps = np.where(key == outcome, state.amps, 0)
    amps = amps / np.linalg.norm(amps)
    bits = tuple((outcome >> pos) & 1 for pos in range(len(qubits)))
    return bits, StateVector(state.num_qubits, amps)


@dataclass
class PhaseEstimator:
    """Pre-measurement QPE state for one input; sampling it is cheap.

    ``joint[w]`` is the (unnormalised) data-register amplitude vector paired
    with register word ``w`` after the inverse Fourier transform.
    """

    t_tilde: int
    num_data_qubits: int
    joint: np.ndarray
    probs: np.ndarray = field(init=False)

    def __post_init__(self):
        p = np.sum(np.abs(self.joint) ** 2, axis=1)
        self.probs = p / p.sum()

    @classmethod
    def prepare(cls, data: StateVector, U: np.ndarray, t_tilde: int) -> "PhaseEstimator":
        if U.shape != (data.dim, data.dim):
            raise ValueError("unitary does not match the data register")
        size = 1 << t_tilde
        # Hadamards on the register: every word carries the data state
        joint = np.tile(data.amps / np.sqrt(size), (size, 1))
        for j in range(t_tilde):
            Up = unitary_power(U, 1 << j)
            view = joint.reshape(size >> (j + 1), 2, 1 << j, data.dim)
            view[:, 1] = view[:, 1] @ Up.T
        joint = np.fft.fft(joint, axis=0, norm="ortho")
        return cls(t_tilde, data.num_qubits, joint)

    def sample(self, rng: np.random.Generator) -> QPEOutcome:
        word = int(rng.choice(self.probs.size, p=self.probs))
        return QPEOutcome(word, self.t_tilde, self.collapse(word))

    def collapse(self, word: int) -> StateVector:
        row = self.joint[word]
        return StateVector(self.num_data_qubits, row / np.linalg.norm(row))

    def sample_words(self, shots: int, rng: np.random.Generator) -> np.ndarray:
        return rng.choice(self.probs.size, size=shots, p=self.probs)


def _check_cap(data: StateVector, qcfg: QPEConfig) -> None:
    total = data.num_qubits + qcfg.t_tilde
    if total > qcfg.qubit_cap:
        raise ResourceLimitError(f"{total} qubits exceed the cap of {qcfg.qubit_cap}")


def prepare_qpe(
    data: StateVector,
    cfg: PhaseConfig,
    qcfg: QPEConfig,
    unitary: np.ndarray | None = None,
) -> PhaseEstimator:
    """Build the phase-estimation state for U_phi (or an explicit ``unitary``)."""
    if abs(data.norm() - 1) > 1e-10:
        raise ValueError("data state must be normalized")
    _check_cap(data, qcfg)
    if unitary is None:
        if data.num_qubits != cfg.n + 1:
            raise ValueError(f"data has {data.num_qubits} qubits, U_phi needs {cfg.n + 1}")
        unitary = uphi_dense(cfg)
    else:
        unitary = check_unitary(unitary)
    return PhaseEstimator.prepare(data, unitary, qcfg.t_tilde)


def qpe_run(
    data: StateVector,
    cfg: PhaseConfig,
    qcfg: QPEConfig,
    rng: np.random.Generator,
    unitary: np.ndarray | None = None,
) -> QPEOutcome:
    return prepare_qpe(data, cfg, qcfg, unitary).sample(rng)


def word_to_phase(word: int, t_tilde: int) -> float:
    return 2 * np.pi * word / 2**t_tilde


def circular_error(phase_a: float, phase_b: float) -> float:
    """Distance on the unit circle, in radians."""
    d = np.mod(phase_a - phase_b, 2 * np.pi)
    return float(min(d, 2 * np.pi - d))
