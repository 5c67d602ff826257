"""Shared, session-cached synthesis and simulation results for the acceptance suite."""

import pytest

from pecacc.synthesis import GAMMA_ONLY, TRACE_ONLY, TRACE_PLUS_GAMMA, GridSpec, Objective, Setup, grid_search

_VERDICTS = {}


def record(number, ok, detail):
    """Remember one acceptance verdict for the end-of-run summary."""
    _VERDICTS[number] = (bool(ok), detail)


def pytest_terminal_summary(terminalreporter):
    if not _VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_VERDICTS):
        ok, detail = _VERDICTS[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture(scope="session")
def setup():
    return Setup()


@pytest.fixture(scope="session")
def grid():
    return GridSpec()


@pytest.fixture(scope="session")
def reports(setup, grid):
    """Full-resolution grid searches for the three objectives at 50 km/h."""
    return {v: grid_search(Objective(v), grid, setup) for v in (TRACE_PLUS_GAMMA, TRACE_ONLY, GAMMA_ONLY)}
