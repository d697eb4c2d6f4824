import numpy as np
import pytest

from venation import Graph, build_diamond
from venation.dynamics import ModelParams

BASELINE_BBOX = (-0.5, 2.0, -1.5, 0.5)


def two_cell(L=1.0):
    return Graph(np.array([[0.0, 0.0], [L, 0.0]]), np.array([[0, 1]]))


def path3():
    return Graph(np.array([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]]), np.array([[0, 1], [1, 2]]))


@pytest.fixture
def diamond9():
    return build_diamond(9, 9, BASELINE_BBOX)


@pytest.fixture
def two_cell_params():
    # S=(1,0), I=(0,1), defaults elsewhere; steady state a=(2,1), X=1
    return ModelParams(delta=1.0, sigma=1.0, kappa=2.0, gamma=0.5, tau=1.0,
                       S=np.array([1.0, 0.0]), I=np.array([0.0, 1.0]))


def baseline_params(g, xi_s=100.0, xi_i=1.0, **kw):
    top = g.positions[:, 0] <= -0.4
    return ModelParams(S=np.where(top, xi_s, 0.0), I=np.where(top, 0.0, xi_i), **kw)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(RESULTS):
            terminalreporter.write_line(line)
