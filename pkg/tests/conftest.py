import pathlib

import numpy as np
import pytest

from calibdis import _kernels, core, worlds

FIXTURES = pathlib.Path(__file__).resolve().parent / "fixtures"

_acceptance_lines = []


def record_acceptance(line: str) -> None:
    _acceptance_lines.append(line)


@pytest.fixture(scope="session", autouse=True)
def kernel_warmup():
    """Compile every kernel once so timed checks see steady-state cost."""
    _kernels.warmup()


@pytest.fixture(scope="session")
def worked_example_ds() -> core.EnsembleDataset:
    probs = np.tile(np.array([0.2, 0.8]), (2, 10, 1))
    labels = np.array([0] * 7 + [1] * 3, dtype=np.int64)
    return core.EnsembleDataset(probs, labels)


@pytest.fixture(scope="session")
def distinct_rows_ds() -> core.EnsembleDataset:
    """Every sample has its own probability rows; scores are tie-free."""
    rng = worlds.SplitMix64(123)
    m, n, k = 3, 97, 4
    probs = rng.floats(m * n * k).reshape(m, n, k) + 0.05
    probs /= probs.sum(axis=2, keepdims=True)
    labels = (rng.floats(n) * k).astype(np.int64)
    return core.EnsembleDataset(probs, labels)


@pytest.fixture(scope="session")
def convergence_world() -> worlds.FiniteWorld:
    """Two inputs, two classes, four well-separated score levels."""
    return worlds.FiniteWorld(
        x_masses=np.array([0.75, 0.25]),
        label_table=np.array([[0.55, 0.45], [0.35, 0.65]]),
        member_tables=np.array([
            [[0.8, 0.2], [0.3, 0.7]],
            [[0.6, 0.4], [0.1, 0.9]],
        ]),
    )


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if _acceptance_lines:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in _acceptance_lines:
            terminalreporter.write_line(line)
