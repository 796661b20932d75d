import numpy as np
import pytest

from gofmult.rng import stream


@pytest.fixture
def rng():
    return stream(20240501)


def random_corr(rng, d, floor=0.05):
    while True:
        A = rng.standard_normal((d, d + 2))
        S = A @ A.T
        s = np.sqrt(np.diag(S))
        R = S / np.outer(s, s)
        if np.linalg.eigvalsh(R).min() > floor:
            return R


def pytest_terminal_summary(terminalreporter):
    from . import test_acceptance

    if test_acceptance.LINES:
        terminalreporter.section("acceptance criteria")
        for line in test_acceptance.LINES:
            terminalreporter.write_line(line)
