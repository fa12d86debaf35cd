import warnings

import pytest

from rmswitch.ctmc import GeneratorQ
from rmswitch.dynamics import TwoTypeGame, fixed_points
from rmswitch.hybrid import SwitchedModel

FIG1_GAME = TwoTypeGame(0.2, 0.3)
FIG1_MU1, FIG1_MU2 = 0.01, 0.26


def figure1_model(q12=10.0, q21=10.0):
    return SwitchedModel(FIG1_GAME, FIG1_MU1, FIG1_MU2, GeneratorQ(q12, q21))


def quiet_model(game, mu1, mu2, Q):
    """Model built without the straddle warning (for degenerate/exploratory setups)."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return SwitchedModel(game, mu1, mu2, Q)


@pytest.fixture(scope="session")
def fig1():
    return figure1_model()


@pytest.fixture(scope="session")
def fig1_q12():
    return figure1_model(q12=12.0)


@pytest.fixture(scope="session")
def fig1_points():
    low = fixed_points(FIG1_GAME, FIG1_MU1)
    high = fixed_points(FIG1_GAME, FIG1_MU2)
    return {"a1": low.a1, "a2": low.a2, "a3": low.a3, "ahat": high.ahat}


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
