import sys

import numpy as np
import pytest

from timeflat.embedding import EmbeddingSpec, evaluate_surface
from timeflat.spacetimes import make_backend
from timeflat.sphere import build_grid


@pytest.fixture(scope="session")
def grid():
    return build_grid(32, 64)


@pytest.fixture(scope="session")
def small_grid():
    return build_grid(16, 32)


def surface(kind, spec, grid, **params):
    return evaluate_surface(spec, grid, make_backend(kind, **params))


@pytest.fixture(scope="session")
def unit_sphere(grid):
    return surface("minkowski", EmbeddingSpec("round", 1.0), grid)


@pytest.fixture(scope="session")
def schwarzschild_sphere(grid):
    return surface("schwarzschild", EmbeddingSpec("round", 4.0), grid, mass=1.0)


@pytest.fixture(scope="session")
def flrw_sphere(grid):
    return surface("flrw", EmbeddingSpec("flrw-comoving", 1.0, 1.0), grid)


@pytest.fixture(scope="session")
def graph_sphere(grid):
    return surface("minkowski", EmbeddingSpec("graph", 1.0, 0.0, 0.3, "Y20"), grid)


@pytest.fixture(scope="session")
def perturbed_sphere(grid):
    return surface("minkowski", EmbeddingSpec("radial", 1.0, 0.0, 0.05, "Y22"), grid)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)



def pytest_terminal_summary(terminalreporter):
    mod = next((m for name, m in list(sys.modules.items()) if name.endswith("test_acceptance")), None)
    lines = getattr(mod, "LINES", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
