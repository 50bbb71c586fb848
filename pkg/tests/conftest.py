import numpy as np
import pytest
from hypothesis import settings

from wgf import ModelParams, PdeConfig, SolverConfig, make_uniform, pde_solve, run_trajectory

settings.register_profile("wgf", deadline=None, max_examples=25, derandomize=True)
settings.load_profile("wgf")


@pytest.fixture(scope="session")
def unit_params():
    return ModelParams(1.0, 1.0)


@pytest.fixture(scope="session")
def step_measure(unit_params):
    """rho = 2 on [0, 1/2]: traces above alpha, so both ends advance outward."""
    return make_uniform(0.0, 0.5, unit_params, 256)


@pytest.fixture(scope="session")
def step_jko(unit_params, step_measure):
    return run_trajectory(step_measure, 0.25, unit_params, SolverConfig())


@pytest.fixture(scope="session")
def step_pde(unit_params, step_measure):
    return pde_solve(step_measure, 0.25, unit_params, PdeConfig(), snapshot_dt=1e-3)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_CRITERIA: list = []


@pytest.fixture
def record_criterion():
    """Print one pass/fail line for an acceptance criterion, then assert it."""

    def record(number: int, title: str, passed: bool, detail: str):
        line = f"criterion {number:2d} [{'PASS' if passed else 'FAIL'}] {title}: {detail}"
        _CRITERIA.append((number, line))
        print(line)
        assert passed, line

    return record


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(_CRITERIA):
            terminalreporter.write_line(line)
