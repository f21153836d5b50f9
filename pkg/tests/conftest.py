from __future__ import annotations

import numpy as np
import pytest

from sdflow.grid import Field, build_grid, derivative_values


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def gaussian_slope(grid, amplitude=0.05, width=0.5) -> Field:
    g = np.exp(-grid.x**2 / (2 * width**2))
    norm = np.max(np.abs(g)) + np.max(np.abs(derivative_values(g, grid, 1)))
    return Field(grid, amplitude * g / norm, 0.0, "v")


@pytest.fixture
def small_periodic():
    return build_grid("periodic", 8.0, 128)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
