import numpy as np
import pytest

from multiway.core import HypergraphCutCount
from multiway.instance import MultiwayInstance


def philox(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(seed))


def random_feasible_x(n: int, k: int, terminals, rng, sparsity: float = 0.3) -> np.ndarray:
    """Random point of the product of simplices with pinned terminals; some
    entries are zeroed and some rows made integral to hit ties."""
    x = rng.random((n, k))
    x[rng.random((n, k)) < sparsity] = 0.0
    x[x.sum(axis=1) == 0, 0] = 1.0
    x /= x.sum(axis=1, keepdims=True)
    for v in np.flatnonzero(rng.random(n) < 0.2):
        x[v] = np.eye(k)[rng.integers(k)]
    x[list(terminals)] = np.eye(k)[: len(terminals)]
    return x


@pytest.fixture
def edge_instance():
    """Two terminals joined by one unit edge."""
    return MultiwayInstance(HypergraphCutCount(2, [(0, 1)]), [0, 1])


# acceptance lines are collected here and printed after the run
ACCEPTANCE_LINES: dict = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for key in sorted(ACCEPTANCE_LINES, key=lambda s: int(s[2:])):
            terminalreporter.write_line(ACCEPTANCE_LINES[key])
