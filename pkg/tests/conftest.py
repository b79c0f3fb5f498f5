import numpy as np
import pytest
from hypothesis import strategies as st

from sparseqst.circuit import PhaseConfig

ACCEPTANCE_RESULTS: dict[int, tuple[bool, str]] = {}


def phase_configs(n_min: int = 1, n_max: int = 4):
    angle = st.floats(0.0, 2 * np.pi, allow_nan=False, exclude_max=True)
    return st.integers(n_min, n_max).flatmap(
        lambda n: st.lists(angle, min_size=n + 1, max_size=n + 1).map(lambda p: PhaseConfig(n, tuple(p)))
    )


def random_state(num_qubits: int, rng: np.random.Generator) -> np.ndarray:
    v = rng.normal(size=1 << num_qubits) + 1j * rng.normal(size=1 << num_qubits)
    return v / np.linalg.norm(v)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def record_criterion():
    def record(number: int, passed: bool, detail: str) -> None:
        ACCEPTANCE_RESULTS[number] = (bool(passed), detail)

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_RESULTS):
        passed, detail = ACCEPTANCE_RESULTS[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}")
