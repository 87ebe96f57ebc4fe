import numpy as np
import pytest

from drcgd.stiefel import random_point


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_orthogonal(rng, r):
    q, _ = np.linalg.qr(rng.standard_normal((r, r)))
    return q


def random_tangent(rng, x):
    y = rng.standard_normal(x.shape)
    s = x.T @ y
    return y - 0.5 * x @ (s + s.T)


def random_points(rng, n, d, r):
    return [random_point(rng, d, r) for _ in range(n)]


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(RESULTS, key=lambda s: int(s.split("criterion")[1].split(":")[0])):
            terminalreporter.write_line(line)
