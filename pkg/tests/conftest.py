import numpy as np
import pytest

from odcreg.machines import HyperParams


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_pairs(rng, M, d_X=2, d_Y=3, y_scale=1.0):
    X = rng.standard_normal((M, d_X))
    Y = y_scale * rng.standard_normal((M, d_Y))
    return X, Y


SMALL_HYPER = HyperParams(rho_x2=2.0, rho_y2=2.0, lambda_x=1e-3, lambda_y=1e-3, sigma_n2=1e-3)


_ACCEPTANCE = []


@pytest.fixture
def verdict():
    """Print and record one pass/fail line; returns the flag for asserting."""

    def emit(number, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}"
        _ACCEPTANCE.append(line)
        print(line)
        return ok

    return emit


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE:
            terminalreporter.write_line(line)
