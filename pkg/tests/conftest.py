import numpy as np
import pytest

from aimdalloc import CostFunction, build_report, generate_paper_scenario, solve_centralized
from aimdalloc.simulator import Simulator

CAMERA_SEED = 42

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def acceptance():
    """Record one pass/fail line for an acceptance criterion, then enforce it."""
    def record(number, name, passed, detail):
        line = f"criterion {number:>2} {'PASS' if passed else 'FAIL'}  {name}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        assert passed, line
    return record


@pytest.fixture(scope="session")
def camera_spec():
    return generate_paper_scenario(CAMERA_SEED)


@pytest.fixture(scope="session")
def camera_run(camera_spec):
    """One full 30000-step run of the camera scenario with its oracle and report."""
    trace = Simulator(camera_spec.sim).run(camera_spec.checkpoint_stride)
    solution = solve_centralized(trace.costs, camera_spec.sim.capacities, camera_spec.oracle_tol,
                                 camera_spec.oracle_max_iter)
    report = build_report(trace, solution.x_star)
    return trace, solution, report


@pytest.fixture
def quad():
    """f(x) = a x^2 on a single resource."""
    def make(a):
        return CostFunction.from_terms([(a, [2])])
    return make


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
