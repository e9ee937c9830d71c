import numpy as np
import pytest
from scipy.special import expit

from mnarlogit.data import Dataset
from mnarlogit.oracle import DEFAULT_TRUTH
from mnarlogit.simulation import SimConfig, run_monte_carlo

ACCEPTANCE_RESULTS = {}


def record_acceptance(number, name, passed, detail):
    ACCEPTANCE_RESULTS[number] = (name, passed, detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_RESULTS):
        name, passed, detail = ACCEPTANCE_RESULTS[number]
        terminalreporter.write_line(
            f"[{'PASS' if passed else 'FAIL'}] {number}. {name}: {detail}")


@pytest.fixture(scope="session")
def default_mc_report():
    """The full 500-replication run of the default outcome-dependent config."""
    return run_monte_carlo(SimConfig())


@pytest.fixture
def mnar_data():
    rng = np.random.default_rng(7)
    n = 3000
    x = rng.standard_normal(n)
    y = (rng.random(n) < expit(DEFAULT_TRUTH.beta0 + x)).astype(float)
    s = (rng.random(n) < expit(1.0 - 0.5 * x - 2.0 * y)).astype(float)
    return Dataset.from_arrays(x, y, s)
