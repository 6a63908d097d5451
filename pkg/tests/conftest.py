import warnings

import numpy as np
import pytest

from crossdiff.mesh import build_cartesian_2d, build_uniform_1d


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_simplex(rng, n, cells, floor=0.0):
    U = rng.dirichlet(np.ones(n), size=cells).T
    if floor:
        U = np.maximum(U, floor)
        U /= U.sum(axis=0)
    return U


@pytest.fixture
def mesh1d():
    return build_uniform_1d((0.0, 1.0), 16)


@pytest.fixture
def mesh2d():
    return build_cartesian_2d(((0.0, 2.0), (0.0, 1.0)), 5, 4)


def quiet_matrix(A, astar):
    from crossdiff.scheme import CrossDiffusionMatrix
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        return CrossDiffusionMatrix(A, astar)


# one line per acceptance criterion, printed at the end of the session
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"criterion {key:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
