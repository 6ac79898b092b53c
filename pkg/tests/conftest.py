"""Shared fixtures.  The expensive scenario runs are computed once per session."""

import time

import pytest

from hagprop.config import load_config, scenario_path
from hagprop.truncation import prepare, sweep_epsilon, sweep_orders

ACCEPTANCE_LINES: list = []


def record(criterion: str, passed: bool, detail: str) -> None:
    ACCEPTANCE_LINES.append(f"{'PASS' if passed else 'FAIL'}  {criterion}: {detail}")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def _scenario(name):
    return load_config(scenario_path(name))


@pytest.fixture(scope="session")
def avoided_prepared():
    sc, _ = _scenario("avoided_crossing")
    return prepare(sc)


@pytest.fixture(scope="session")
def avoided_sweep(avoided_prepared):
    """Order sweeps over the default eps list with residual bounds, and the wall time."""
    t0 = time.perf_counter()
    res = sweep_epsilon(avoided_prepared)
    return res, avoided_prepared.seconds + time.perf_counter() - t0


@pytest.fixture(scope="session")
def trivial_prepared():
    sc, _ = _scenario("trivial_adiabatic")
    return prepare(sc)


@pytest.fixture(scope="session")
def trivial_sweep(trivial_prepared):
    t0 = time.perf_counter()
    s = sweep_orders(trivial_prepared, 0.1)
    return s, trivial_prepared.seconds + time.perf_counter() - t0
