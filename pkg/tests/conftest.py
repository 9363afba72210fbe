import time

import numpy as np
import pytest

from xicont.continuation import make_problem, trace_curve
from xicont.fishing import default_scenario, trace_fishing_curve
from xicont.grid import GridSpec
from xicont.nonlinearity import make_softplus_family

# criterion number -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture(scope="session")
def problem():
    """``L = π``, ``n = 200``, ``f = 1``."""
    return make_problem(GridSpec.interval(np.pi, 200), "constant")


@pytest.fixture(scope="session")
def small_problem():
    return make_problem(GridSpec.interval(np.pi, 60), "constant")


@pytest.fixture(scope="session")
def convex_g(problem):
    return make_softplus_family(-1.0, 0.5 * (problem.lam1 + problem.nu))


@pytest.fixture(scope="session")
def convex_curve(problem, convex_g):
    """The parabola-min curve on ``ξ ∈ [-100, 100]``; ``elapsed`` is stored in diagnostics."""
    t0 = time.perf_counter()
    curve = trace_curve(problem, convex_g, -100.0, 100.0)
    curve.diagnostics["elapsed"] = time.perf_counter() - t0
    return curve


@pytest.fixture(scope="session")
def fishing_result():
    t0 = time.perf_counter()
    res = trace_fishing_curve(default_scenario(200))
    res.checks["elapsed"] = time.perf_counter() - t0
    return res
