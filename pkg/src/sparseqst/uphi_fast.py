"""Closed-form elements of U_phi in O(n).

The photon amplitude is carried as a real 4-vector ``[a0, b0, a1, b1]``
(real/imaginary parts of the photon-|0> and photon-|1> amplitudes), so
multiplication by e^{i alpha} becomes the 2x2 rotation R(alpha).
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from .circuit import PhaseConfig, StateVector

HALF_PI = np.pi / 2
I2 = np.eye(2)
O2 = np.zeros((2, 2))

V_IN = {0: np.array([1.0, 0.0, 0.0, 0.0]), 1: np.array([0.0, 0.0, 1.0, 0.0])}
U_OUT = {0: np.array([1.0, 1j, 0.0, 0.0]), 1: np.array([0.0, 0.0, 1.0, 1j])}

# Swapped in by tests to count multiplications.
_matvec = np.dot


def rot(alpha: float) -> np.ndarray:
    c, s = np.cos(alpha), np.sin(alpha)
    return np.array([[c, -s], [s, c]])


def _blocks(tl, tr, bl, br) -> np.ndarray:
    return np.block([[tl, tr], [bl, br]])


_M_SAME = _blocks(I2, rot(HALF_PI), O2, O2)
_M_SAME.flags.writeable = False


def _m_same() -> np.ndarray:
    return _M_SAME


def _m_flip(phi: float) -> np.ndarray:
    # lower-left R(phi + pi/2), lower-right R(phi), written out entrywise
    c, s = math.cos(phi), math.sin(phi)
    return np.array(
        [
            [0.0, 0.0, 0.0, 0.0],
            [0.0, 0.0, 0.0, 0.0],
            [-s, -c, c, -s],
            [c, -s, s, c],
        ]
    )


def m_matrix(stage: int, d_bit: int, e_bit: int, cfg: PhaseConfig) -> np.ndarray:
    """Transfer matrix for detector ``stage`` < n given its input and output bits."""
    if not 1 <= stage < cfg.n:
        raise ValueError(f"stage must be in [1, {cfg.n - 1}], got {stage}")
    return _m_same() if d_bit == e_bit else _m_flip(cfg.phi(stage))


def m_matrix_final(d_bit: int, e_bit: int, cfg: PhaseConfig) -> np.ndarray:
    """Last detector stage with the closing splitter and phi_{n+1} folded in.

    Uses R(a) R(b) = R(a + b) to write the two-factor product directly:
    [[I, R(pi/2)], [R(phi_{n+1} + pi/2), R(phi_{n+1} + pi)]] when the bits agree and
    [[R(phi_n + pi), R(phi_n + pi/2)], [R(phi_n + phi_{n+1} + pi/2), R(phi_n + phi_{n+1})]]
    otherwise.
    """
    pn, pn1 = cfg.phi(cfg.n), cfg.phi(cfg.n + 1)
    if d_bit == e_bit:
        c1, s1 = math.cos(pn1), math.sin(pn1)
        return np.array(
            [
                [1.0, 0.0, 0.0, -1.0],
                [0.0, 1.0, 1.0, 0.0],
                [-s1, -c1, -c1, s1],
                [c1, -s1, -s1, -c1],
            ]
        )
    c, s = math.cos(pn), math.sin(pn)
    ca, sa = math.cos(pn + pn1), math.sin(pn + pn1)
    return np.array(
        [
            [-c, s, -s, -c],
            [-s, -c, c, -s],
            [-sa, -ca, ca, -sa],
            [ca, -sa, sa, ca],
        ]
    )


def stage_matrix(stage: int, d_bit: int, e_bit: int, cfg: PhaseConfig) -> np.ndarray:
    if stage == cfg.n:
        return m_matrix_final(d_bit, e_bit, cfg)
    return m_matrix(stage, d_bit, e_bit, cfg)


def bit_reverse(index: int, num_bits: int) -> int:
    """Map between the detector-ordered index and the canonical qubit index.

    In detector order, bit j-1 is detector j and bit n is the photon; in the
    canonical order bit 0 is the photon and bit n+1-j is detector j. The two
    are related by reversing all n+1 bits.
    """
    out = 0
    for _ in range(num_bits):
        out = (out << 1) | (index & 1)
        index >>= 1
    return out


def _check_index(x: int, n: int) -> None:
    if not 0 <= x < 1 << (n + 1):
        raise ValueError(f"index {x} out of range for n={n}")


def _contract(q_in: int, q_out: int, mats) -> complex:
    w = V_IN[q_in]
    for m in mats:
        w = _matvec(m, w)
    return complex(np.dot(U_OUT[q_out], w))


def uphi_element(k: int, l: int, cfg: PhaseConfig) -> complex:
    """U_phi(k, l) in detector order.

    ``k = sum_j e_j 2^{j-1}`` (photon output e_{n+1} is the top bit) and
    ``l = Q 2^n + sum_j D_j 2^{j-1}``.
    """
    n = cfg.n
    _check_index(k, n)
    _check_index(l, n)
    mats = (stage_matrix(j, (l >> (j - 1)) & 1, (k >> (j - 1)) & 1, cfg) for j in range(1, n + 1))
    return _contract((l >> n) & 1, (k >> n) & 1, mats) / 2 ** ((n + 1) / 2)


def uphi_element_reordered(k: int, j: int, cfg: PhaseConfig) -> complex:
    """<k|U_phi|j> with canonical bit order (bit 0 = photon)."""
    n = cfg.n
    _check_index(k, n)
    _check_index(j, n)
    mats = (
        stage_matrix(l, (j >> (n + 1 - l)) & 1, (k >> (n + 1 - l)) & 1, cfg)
        for l in range(1, n + 1)
    )
    return _contract(j & 1, k & 1, mats) / 2 ** ((n + 1) / 2)


# -- Appendix-A style path sums ------------------------------------------------


def _c_tilde(theta: float, phase: float) -> complex:
    return np.cos(theta) * np.exp(1j * phase)


def _s_tilde(theta: float, phase: float) -> complex:
    return 1j * np.sin(theta) * np.exp(1j * phase)


def appendix_a_amplitude(
    path: Sequence[int],
    thetas: Sequence[float],
    phase_pairs: Sequence[Sequence[float]],
    q: int = 0,
) -> complex:
    """Amplitude A(j) of the photon taking ``path = (j_1, ..., j_{n+1})``.

    ``q`` is the photon input; staying on the same arm contributes a cosine
    factor, switching arms an ``i sin`` factor, each carrying the phase of the
    arm taken. For q=0 the first factor is K_{j_1}.
    """
    if len(path) != len(thetas) or len(path) != len(phase_pairs):
        raise ValueError("path, thetas and phase_pairs must have equal length")
    amp = 1.0 + 0j
    prev = q
    for k, bit in enumerate(path):
        phase = phase_pairs[k][bit]
        amp *= _c_tilde(thetas[k], phase) if bit == prev else _s_tilde(thetas[k], phase)
        prev = bit
    return amp


def appendix_a_state(
    thetas: Sequence[float],
    phase_pairs: Sequence[Sequence[float]],
    wpd_basis: Sequence[int],
    q_amps: tuple[complex, complex],
) -> StateVector:
    """Final photon + detector state as an explicit sum over photon paths.

    ``wpd_basis[k-1]`` is the initial state D_k of detector k. A detector
    flips exactly when the photon passes its lower arm.
    """
    n = len(wpd_basis)
    if len(thetas) != n + 1 or len(phase_pairs) != n + 1:
        raise ValueError(f"need {n + 1} angles and phase pairs for {n} detectors")
    if abs(abs(q_amps[0]) ** 2 + abs(q_amps[1]) ** 2 - 1) > 1e-10:
        raise ValueError("photon amplitudes must be normalized")
    amps = np.zeros(1 << (n + 1), dtype=complex)
    for code in range(1 << (n + 1)):
        path = [(code >> i) & 1 for i in range(n + 1)]
        index = path[n]
        for k in range(1, n + 1):
            index |= (path[k - 1] ^ wpd_basis[k - 1]) << (n + 1 - k)
        for q, alpha in enumerate(q_amps):
            if alpha != 0:
                amps[index] += alpha * appendix_a_amplitude(path, thetas, phase_pairs, q)
    return StateVector(n + 1, amps)
