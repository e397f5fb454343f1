import numpy as np
import pytest

from pathgames.path_space import Grid, Path


@pytest.fixture
def grid():
    return Grid(0.0, 1.0, 16)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_walk(rng, grid, d=1, end=None, scale=0.3):
    end = grid.n_steps if end is None else end
    vals = np.cumsum(rng.normal(size=(end + 1, d)) * scale, axis=0)
    return Path(grid, vals, end)


# (number, status, title, detail) rows filled by the acceptance suite
ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, status, title, detail in sorted(ACCEPTANCE, key=lambda r: r[0]):
        terminalreporter.write_line(f"[{status}] criterion {number:>2}: {title}: {detail}")
