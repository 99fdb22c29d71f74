import numpy as np
import pytest

from stimemit import numeric
from stimemit.core import Grid1D, PhysParams, make_exponential_pulse

# filled by test_acceptance, printed at the end of the run
ACCEPTANCE_LINES: list[str] = []


def run_solver(delta=3.0, detuning=0.0, t_max=10.0, dr=0.01, **kw):
    params = PhysParams(delta=delta, detuning=detuning)
    grid = Grid1D.for_run(delta, t_max, dr=dr)
    return numeric.evolve(make_exponential_pulse(params, grid), params, grid, **kw)


@pytest.fixture(scope="session")
def optimal_history():
    """Delta = 3, on resonance, reference grid, long enough for readout."""
    return run_solver(3.0, 0.0, t_max=30.0, dr=0.01)


@pytest.fixture(scope="session")
def short_history():
    return run_solver(2.0, 1.5, t_max=4.0, dr=0.02)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
