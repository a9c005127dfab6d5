import numpy as np
import pytest


def philox_normals(seed, rep, n):
    """Reference draws for one replicate, straight from numpy."""
    return np.random.Generator(np.random.Philox(key=[seed, rep])).standard_normal(n)


def reference_functional(b, alpha, lam, dt, y0=0.0):
    """Plain-Python trapezoid rule for int V(B), used as an oracle."""
    def v(u):
        return u**alpha if u >= 0 else -lam * (-u) ** alpha

    x = [y0]
    for k in range(1, len(b)):
        x.append(x[-1] + 0.5 * dt * (v(b[k - 1]) + v(b[k])))
    return np.array(x)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("criterion")[1].split()[0])):
            terminalreporter.write_line(line)
