import numpy as np
import pytest
from numpy.polynomial import Polynomial

from delaysof.model import DelaySystem, InitialFunction
from delaysof.sim import simulate

ACCEPTANCE_LINES = []


def scalar_loop(a=0.0, h=1.0):
    """x' = a x + u(t - h), y = x; the gain is the delayed coefficient."""
    return DelaySystem([[a]], [[1.0]], [[1.0]], h)


def pure_delay_exact(T, c=1.0):
    """x' = -x(t - 1), x = c on [-1, 0], by exact polynomial method of steps."""
    pieces = [Polynomial([c])]
    k = 0
    while k < T:
        k += 1
        rhs = -pieces[-1](Polynomial([-1.0, 1.0]))
        prim = rhs.integ()
        pieces.append(prim + (pieces[-1](k - 1) - prim(k - 1)))
    return pieces[max(int(np.ceil(T)), 1)](T)


def newton_root(f, df, z, iters=50):
    for _ in range(iters):
        z = z - f(z) / df(z)
    return z


@pytest.fixture(scope="session", autouse=True)
def warm_jit():
    """Compile the integrator kernels once so timed checks exclude JIT cost."""
    sys = scalar_loop()
    simulate(sys, [[-1.0]], InitialFunction.constant([1.0], 1.0), 1.0, 4)
    from delaysof.grad import loss_and_gradient

    loss_and_gradient(sys, [[-1.0]], InitialFunction.constant([1.0], 1.0), 1.0, 4)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
