import math

import numpy as np
import pytest

from decwave.dec import assemble_laplacian, build_dual_metrics
from decwave.mesh import generate_flat_grid, generate_icosphere, generate_tetrahedron

SQRT3 = math.sqrt(3.0)

# filled by tests/test_acceptance.py, printed after the run
ACCEPTANCE_RESULTS = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_RESULTS):
        passed, line = ACCEPTANCE_RESULTS[key]
        terminalreporter.write_line(f"[{'PASS' if passed else 'FAIL'}] {line}")


def build(mesh):
    metrics = build_dual_metrics(mesh)
    return mesh, metrics, assemble_laplacian(mesh, metrics)


@pytest.fixture(scope="session")
def tet():
    return build(generate_tetrahedron(1.0))


@pytest.fixture(scope="session")
def grid():
    return build(generate_flat_grid(17, 17, 0.25))


@pytest.fixture(scope="session")
def ico2():
    return build(generate_icosphere(1.0, 2))


@pytest.fixture(scope="session")
def ico3():
    return build(generate_icosphere(1.0, 3))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
