import numpy as np
import pytest
from hypothesis import settings, strategies as st

from annulus_bnf.rng import task_rng
from annulus_bnf.series import FourierTaylorSeries, random_trig_polynomial

settings.register_profile("default", max_examples=25, deadline=None)
settings.load_profile("default")


def series_strategy(n_r_max=4, n_theta_max=3, amplitude=1.0, rows=None):
    """Hypothesis strategy: random real series drawn from an integer seed."""
    rows = range(n_r_max + 1) if rows is None else rows

    def build(seed):
        return random_trig_polynomial(task_rng(seed), rows, n_theta_max, amplitude, n_r_max, n_theta_max)

    return st.integers(0, 2**32 - 1).map(build)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_series(seed, n_r_max=4, n_theta_max=3, amplitude=1.0, rows=None, kmax=None):
    rows = range(n_r_max + 1) if rows is None else rows
    kmax = n_theta_max if kmax is None else kmax
    return random_trig_polynomial(task_rng(seed), rows, kmax, amplitude, n_r_max, n_theta_max)


def cos_series(n, k, amp=1.0, N=4, K=4):
    return FourierTaylorSeries.cos_mode(n, k, amp, N, K)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
