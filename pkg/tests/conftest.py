"""Shared fixtures: the two case studies, their oracle solutions, and a
terminal-summary hook that reprints the acceptance verdict lines."""

import numpy as np
import pytest

from nashflow import graph, oracle, scenarios

# One verdict line per acceptance test, replayed after the run so they are
# visible even with output capture on.
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def opf3():
    return scenarios.opf_scenario(graph.path_graph(3))


@pytest.fixture(scope="session")
def opf3_oracle(opf3):
    return oracle.solve_ve_active_set(opf3.quad)


@pytest.fixture(scope="session")
def thermal10():
    return scenarios.thermal_scenario()


@pytest.fixture(scope="session")
def thermal10_oracle(thermal10):
    return oracle.solve_ve_active_set(thermal10.quad)


def tiny_equality_game():
    """Two scalar agents, one shared equality, solution known on paper.

    f_1 = (w_1 - 1)^2, f_2 = (w_2 - 2)^2, w_1 + w_2 = 2.  Stationarity
    2(w_1 - 1) + lam = 0 = 2(w_2 - 2) + lam forces w_1 - 1 = w_2 - 2;
    with the equality that is w = (0.5, 1.5), lam = 1.
    """
    return oracle.QuadraticGnep(
        agent_dims=[1, 1],
        q_blocks=[np.array([[2.0, 0.0]]), np.array([[0.0, 2.0]])],
        b_blocks=[np.array([-2.0]), np.array([-4.0])],
        equality=(np.array([[1.0, 1.0]]), np.array([-2.0])),
    )


TINY_EQ_W = np.array([0.5, 1.5])
TINY_EQ_LAM = np.array([1.0])


def tiny_inequality_game():
    """Same game plus w_2 <= 1.2, which is active at the solution.

    With the cap binding: w = (0.8, 1.2), and from the two stationarity
    rows lam = 2(1 - w_1) = 0.4, mu = 2(2 - w_2) - lam = 1.2.
    """
    qg = tiny_equality_game()
    return oracle.QuadraticGnep(
        agent_dims=qg.agent_dims,
        q_blocks=qg.q_blocks,
        b_blocks=qg.b_blocks,
        equality=qg.equality,
        inequality=(np.array([[0.0, 1.0]]), np.array([-1.2])),
    )


TINY_INEQ_W = np.array([0.8, 1.2])
TINY_INEQ_LAM = np.array([0.4])
TINY_INEQ_MU = np.array([1.2])
