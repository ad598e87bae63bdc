import numpy as np
import pytest
from hypothesis import HealthCheck, settings

import vrsolve.duality as duality
from vrsolve import synthesize, preprocess

# compiled kernels make the first example slow; no per-example deadline
settings.register_profile("vrsolve", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("vrsolve")


def make_data(n, p, seed=0, density=1.0, cond=10.0, task="binary", k=3):
    X, y = synthesize(n, p, density=density, cond=cond, seed=seed, task=task,
                      k=k)
    preprocess(X)
    return X, y


@pytest.fixture
def binary_data():
    return make_data(400, 12, seed=1)


@pytest.fixture
def sparse_binary_data():
    return make_data(400, 30, seed=2, density=0.2)


@pytest.fixture
def regression_data():
    return make_data(300, 10, seed=3, task="regression")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# -------------------------------------------------- session-wide bookkeeping

GAP_FLOOR = -1e-9


class GapLog:
    """Every certificate evaluated by a solver during the session."""

    def __init__(self):
        self.count = 0
        self.worst = np.inf
        self.violations = []

    def record(self, rep):
        if rep.certified:
            self.count += 1
            self.worst = min(self.worst, rep.gap)
            if rep.gap < GAP_FLOOR:
                self.violations.append(rep)


GAPS = GapLog()
CRITERIA = {}
_gap = duality.duality_gap


def _recording_gap(*args, **kwargs):
    rep = _gap(*args, **kwargs)
    GAPS.record(rep)
    return rep


# solvers reach the certificate through the module attribute
duality.duality_gap = _recording_gap


def report_criterion(number, ok, detail):
    line = "criterion %2d: %s  %s" % (number, "PASS" if ok else "FAIL", detail)
    CRITERIA[number] = line
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if CRITERIA:
        terminalreporter.section("acceptance criteria")
        for number in sorted(CRITERIA):
            terminalreporter.write_line(CRITERIA[number])
    terminalreporter.write_line(
        "duality gap evaluations: %d, smallest gap %g"
        % (GAPS.count, GAPS.worst))


def pytest_sessionfinish(session):
    if GAPS.violations and session.exitstatus == 0:
        session.exitstatus = 1
