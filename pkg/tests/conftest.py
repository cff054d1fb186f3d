import sys
import warnings

import numpy as np
import pytest

from finitegap.curve import MarkedPoint, build_curve
from finitegap.differentials import OnePointData, TwoPointData
from finitegap.involution import involution_action, prym_two_point_data
from finitegap.periods import riemann_matrix, with_riemann_constants

SEXTIC = [1, 0, -14, 0, 49, 0, -36]          # (x^2 - 1)(x^2 - 4)(x^2 - 9)
TODA_A = 1.5 + 0.5j


def pytest_configure(config):
    warnings.filterwarnings("ignore", category=RuntimeWarning, module="finitegap")


@pytest.fixture(scope="session")
def lemniscate():
    return with_riemann_constants(riemann_matrix(build_curve([4, 0, -4, 0])))


@pytest.fixture(scope="session")
def quintic():
    return with_riemann_constants(riemann_matrix(build_curve([1, 0, 0, 0, 0, -1])))


@pytest.fixture(scope="session")
def lemniscate_one(lemniscate):
    return OnePointData(lemniscate)


@pytest.fixture(scope="session")
def quintic_one(quintic):
    return OnePointData(quintic)


@pytest.fixture(scope="session")
def sextic_period():
    c = build_curve(SEXTIC, marked_points=[MarkedPoint(0j)])
    return with_riemann_constants(riemann_matrix(c))


@pytest.fixture(scope="session")
def sextic_one(sextic_period):
    return OnePointData(sextic_period)


@pytest.fixture(scope="session")
def sextic_flex(sextic_period):
    return involution_action(sextic_period, "flex")


@pytest.fixture(scope="session")
def sextic_two_period():
    c = build_curve(SEXTIC, marked_points=[MarkedPoint(TODA_A), MarkedPoint(-TODA_A)])
    return with_riemann_constants(riemann_matrix(c))


@pytest.fixture(scope="session")
def sextic_two(sextic_two_period):
    return TwoPointData(sextic_two_period)


@pytest.fixture(scope="session")
def sextic_toda(sextic_two_period):
    """(two-point data with sigma-odd U0, toda involution data)."""
    return prym_two_point_data(sextic_two_period)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        terminalreporter.write_line(results[n])
