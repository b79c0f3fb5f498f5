"""Dense state-vector simulation and the U_phi circuit.

Bit convention used everywhere in the package: bit ``l`` of a basis index is
qubit ``l``. Qubit 0 is the photon (ancilla); qubit ``l`` for ``1 <= l <= n``
holds which-path detector ``n + 1 - l``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

DENSE_LIMIT = 10
UNITARY_ATOL = 1e-9

SQRT1_2 = 1.0 / np.sqrt(2.0)
RX_MINUS_PI_2 = SQRT1_2 * np.array([[1, 1j], [1j, 1]], dtype=complex)
HADAMARD = SQRT1_2 * np.array([[1, 1], [1, -1]], dtype=complex)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)


class ResourceLimitError(RuntimeError):
    """Requested simulation exceeds a configured size cap."""


def phase_gate(phi: float) -> np.ndarray:
    return np.array([[1, 0], [0, np.exp(1j * phi)]], dtype=complex)


def beam_splitter(theta: float) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, 1j * s], [1j * s, c]], dtype=complex)


def check_unitary(g: np.ndarray, atol: float = UNITARY_ATOL) -> np.ndarray:
    g = np.asarray(g, dtype=complex)
    if g.ndim != 2 or g.shape[0] != g.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {g.shape}")
    err = np.abs(g.conj().T @ g - np.eye(g.shape[0])).max()
    if err > atol:
        raise ValueError(f"matrix is not unitary (max |G^dag G - I| = {err:.3e})")
    return g


@dataclass(frozen=True)
class StateVector:
    num_qubits: int
    amps: np.ndarray

    def __post_init__(self):
        amps = np.array(self.amps, dtype=complex).reshape(-1)
        if self.num_qubits < 1:
            raise ValueError("num_qubits must be >= 1")
        if amps.size != 1 << self.num_qubits:
            raise ValueError(
                f"{amps.size} amplitudes do not match {self.num_qubits} qubits"
            )
        amps.flags.writeable = False
        object.__setattr__(self, "amps", amps)

    @property
    def dim(self) -> int:
        return 1 << self.num_qubits

    def norm(self) -> float:
        return float(np.linalg.norm(self.amps))

    def to_json(self) -> list[list[float]]:
        return [[float(a.real), float(a.imag)] for a in self.amps]

    @classmethod
    def from_json(cls, pairs: Sequence[Sequence[float]]) -> "StateVector":
        amps = np.array([complex(re, im) for re, im in pairs])
        num_qubits = int(round(np.log2(len(amps))))
        return cls(num_qubits, amps)


@dataclass(frozen=True)
class PhaseConfig:
    """Phase-shift vector (phi_1, ..., phi_{n+1}) defining U_phi."""

    n: int
    phis: tuple[float, ...]

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be >= 1")
        phis = tuple(float(p) % (2 * np.pi) for p in self.phis)
        if len(phis) != self.n + 1:
            raise ValueError(f"need {self.n + 1} phases, got {len(phis)}")
        object.__setattr__(self, "phis", phis)

    @classmethod
    def from_phis(cls, phis: Sequence[float]) -> "PhaseConfig":
        return cls(len(phis) - 1, tuple(phis))

    @classmethod
    def random(cls, n: int, rng: np.random.Generator) -> "PhaseConfig":
        return cls(n, tuple(rng.uniform(0.0, 2 * np.pi, n + 1)))

    def phi(self, k: int) -> float:
        """1-based access, matching phi_k."""
        return self.phis[k - 1]


def new_basis_state(num_qubits: int, basis_index: int) -> StateVector:
    if not 0 <= basis_index < 1 << num_qubits:
        raise ValueError(f"basis index {basis_index} out of range for {num_qubits} qubits")
    amps = np.zeros(1 << num_qubits, dtype=complex)
    amps[basis_index] = 1.0
    return StateVector(num_qubits, amps)


# -- array kernels -----------------------------------------------------------
# These act on arrays of shape (2**N,) or (2**N, batch); the batch axis lets
# uphi_dense push the whole identity through the circuit at once.


def _apply_1q(amps: np.ndarray, qubit: int, g: np.ndarray) -> np.ndarray:
    dim = amps.shape[0]
    t = amps.reshape(dim >> (qubit + 1), 2, 1 << qubit, *amps.shape[1:])
    a0, a1 = t[:, 0], t[:, 1]
    out = np.empty_like(t)
    out[:, 0] = g[0, 0] * a0 + g[0, 1] * a1
    out[:, 1] = g[1, 0] * a0 + g[1, 1] * a1
    return out.reshape(amps.shape)


def _apply_diag_q0(amps: np.ndarray, d0: complex, d1: complex) -> np.ndarray:
    out = amps.copy()
    if d0 != 1:
        out[0::2] *= d0
    out[1::2] *= d1
    return out


@lru_cache(maxsize=256)
def _cnot_perm(num_qubits: int, control: int, target: int) -> np.ndarray:
    idx = np.arange(1 << num_qubits)
    perm = idx ^ (((idx >> control) & 1) << target)
    perm.flags.writeable = False
    return perm


def _apply_cnot(amps: np.ndarray, num_qubits: int, control: int, target: int) -> np.ndarray:
    return amps[_cnot_perm(num_qubits, control, target)]


def _check_qubit(state: StateVector, q: int) -> None:
    if not 0 <= q < state.num_qubits:
        raise ValueError(f"qubit {q} out of range for {state.num_qubits} qubits")


# -- gate operations -----------------------------------------------------------


def apply_gate1(state: StateVector, qubit: int, g: np.ndarray) -> StateVector:
    _check_qubit(state, qubit)
    g = check_unitary(g)
    if g.shape != (2, 2):
        raise ValueError("single-qubit gate must be 2x2")
    return StateVector(state.num_qubits, _apply_1q(state.amps, qubit, g))


def apply_cnot(state: StateVector, control: int, target: int) -> StateVector:
    _check_qubit(state, control)
    _check_qubit(state, target)
    if control == target:
        raise ValueError("control and target must differ")
    return StateVector(
        state.num_qubits, _apply_cnot(state.amps, state.num_qubits, control, target)
    )


def _check_distinct(qubits: Sequence[int]) -> None:
    if len(set(qubits)) != len(qubits):
        raise ValueError(f"duplicate qubit indices in {list(qubits)}")


def apply_hadamard_layer(state: StateVector, qubits: Sequence[int]) -> StateVector:
    _check_distinct(qubits)
    amps = state.amps
    for q in qubits:
        _check_qubit(state, q)
        amps = _apply_1q(amps, q, HADAMARD)
    return StateVector(state.num_qubits, amps)


def _uphi_kernel(amps: np.ndarray, cfg: PhaseConfig) -> np.ndarray:
    n, N = cfg.n, cfg.n + 1
    for k in range(1, n + 1):
        amps = _apply_1q(amps, 0, RX_MINUS_PI_2)
        amps = _apply_cnot(amps, N, 0, n + 1 - k)
        amps = _apply_diag_q0(amps, 1.0, np.exp(1j * cfg.phi(k)))
    amps = _apply_1q(amps, 0, RX_MINUS_PI_2)
    return _apply_diag_q0(amps, 1.0, np.exp(1j * cfg.phi(n + 1)))


def apply_uphi_circuit(state: StateVector, cfg: PhaseConfig) -> StateVector:
    """Run the beam-splitter / which-path-detector circuit on ``state``.

    Stage k applies R_X(-pi/2) to the photon, a CNOT from the photon onto
    detector k (qubit n+1-k) and then the phase gate diag(1, e^{i phi_k}).
    The last stage has no detector.
    """
    if state.num_qubits != cfg.n + 1:
        raise ValueError(
            f"state has {state.num_qubits} qubits, U_phi needs {cfg.n + 1}"
        )
    return StateVector(state.num_qubits, _uphi_kernel(state.amps, cfg))


def apply_general_optics_circuit(
    state: StateVector,
    thetas: Sequence[float],
    phase_pairs: Sequence[Sequence[float]],
) -> StateVector:
    """Optical set-up with arbitrary splitting angles and per-path phases.

    ``phase_pairs[k-1] = (phi_{k,0}, phi_{k,1})`` are the phases picked up on
    the photon's path 0 and path 1 after splitter k.
    """
    n = state.num_qubits - 1
    if len(thetas) != n + 1 or len(phase_pairs) != n + 1:
        raise ValueError(f"need {n + 1} angles and phase pairs for {state.num_qubits} qubits")
    amps = state.amps
    for k in range(1, n + 2):
        amps = _apply_1q(amps, 0, beam_splitter(thetas[k - 1]))
        if k <= n:
            amps = _apply_cnot(amps, n + 1, 0, n + 1 - k)
        p0, p1 = phase_pairs[k - 1]
        amps = _apply_diag_q0(amps, np.exp(1j * p0), np.exp(1j * p1))
    return StateVector(state.num_qubits, amps)


def uphi_dense(cfg: PhaseConfig, max_n: int = DENSE_LIMIT) -> np.ndarray:
    """Dense 2^{n+1} x 2^{n+1} matrix of U_phi, column j = U_phi |j>."""
    if cfg.n > max_n:
        raise ResourceLimitError(f"n={cfg.n} exceeds dense limit {max_n}")
    dim = 1 << (cfg.n + 1)
    return _uphi_kernel(np.eye(dim, dtype=complex), cfg)


def unitary_power(U: np.ndarray, p: int) -> np.ndarray:
    """U**p by square-and-multiply."""
    if p < 0:
        raise ValueError("power must be non-negative")
    U = np.asarray(U, dtype=complex)
    result = np.eye(U.shape[0], dtype=complex)
    base = U
    while p:
        if p & 1:
            result = base @ result
        p >>= 1
        if p:
            base = base @ base
    return result
