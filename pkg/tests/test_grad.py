import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import scalar_loop
from delaysof.exceptions import EmptyBatchError
from delaysof.grad import (
    CAPPED_LOSS,
    _rollouts,
    batch_loss_and_gradient,
    finite_difference_gradient,
    gradient_error,
    loss_and_gradient,
)
from delaysof.model import DelaySystem, InitialFunction
from delaysof.sim import simulate, terminal_norm

ONE = InitialFunction.constant([1.0], 1.0)
TWO = InitialFunction.constant([2.0], 1.0)


@pytest.mark.parametrize("K, loss, grad", [(-0.5, 0.5, 1.0), (-2.0, 1.0, -1.0)])
def test_scalar_loop_closed_form(K, loss, grad):
    # x(1) = 1 + K on the first delay interval
    res = loss_and_gradient(scalar_loop(0.0), [[K]], ONE, 1.0, 32)
    assert res.loss == pytest.approx(loss, abs=1e-8)
    assert res.grad[0, 0] == pytest.approx(grad, abs=1e-8)
    assert res.aborted == 0


def test_zero_history_zero_gradient():
    res = loss_and_gradient(scalar_loop(0.3), [[-0.5]], InitialFunction.constant([0.0], 1.0), 2.0, 16)
    assert res.loss == 0.0
    assert np.array_equal(res.grad, np.zeros((1, 1)))


def test_sensitivity_is_t_on_first_interval():
    sys = scalar_loop(0.0)
    # S' = K S(t-1) + x(t-1) = 1 on [0, 1]; recover S from the gradient x S / |x|
    for T in (0.25, 0.5, 1.0):
        res = loss_and_gradient(sys, [[-0.5]], ONE, T, 32)
        x = 1 - 0.5 * T
        assert res.grad[0, 0] * np.sign(x) == pytest.approx(T, abs=1e-8)


def test_loss_agrees_with_simulation(rng):
    sys = DelaySystem(rng.standard_normal((3, 3)), rng.standard_normal((3, 2)),
                      rng.standard_normal((1, 3)), 0.4)
    K = rng.uniform(-1, 1, (2, 1))
    phi = InitialFunction.linear(rng.standard_normal(3), rng.standard_normal(3), 0.4)
    res = loss_and_gradient(sys, K, phi, 2.3, 16)
    traj = simulate(sys, K, phi, 2.3, 16)
    assert res.loss == pytest.approx(terminal_norm(traj, 2.3), rel=1e-13)


def test_batch_examples():
    sys = scalar_loop(0.0)
    single = loss_and_gradient(sys, [[-0.5]], ONE, 1.0, 32)
    b1 = batch_loss_and_gradient(sys, [[-0.5]], [ONE], 1.0, 32)
    assert b1.loss == single.loss and np.array_equal(b1.grad, single.grad)
    dup = batch_loss_and_gradient(sys, [[-0.5]], [ONE, ONE], 1.0, 32)
    assert dup.loss == single.loss and np.array_equal(dup.grad, single.grad)
    pair = batch_loss_and_gradient(sys, [[-0.5]], [ONE, TWO], 1.0, 32)
    assert pair.loss == pytest.approx(0.75, abs=1e-8)
    assert pair.grad[0, 0] == pytest.approx(1.5, abs=1e-8)


def test_empty_batch():
    with pytest.raises(EmptyBatchError):
        batch_loss_and_gradient(scalar_loop(), [[0.0]], [], 1.0, 8)


def test_batch_is_mean_of_samples(rng):
    sys = DelaySystem(rng.standard_normal((2, 2)), rng.standard_normal((2, 2)),
                      rng.standard_normal((2, 2)), 0.5)
    K = rng.uniform(-1, 1, (2, 2))
    phis = [InitialFunction.constant(v, 0.5) for v in rng.standard_normal((5, 2))]
    batch = batch_loss_and_gradient(sys, K, phis, 1.7, 16)
    singles = [loss_and_gradient(sys, K, p, 1.7, 16) for p in phis]
    loss = 0.0
    grad = np.zeros((2, 2))
    for s in singles:
        loss += s.loss
        grad += s.grad
    assert batch.loss == loss / 5
    assert np.array_equal(batch.grad, grad / 5)
    again = batch_loss_and_gradient(sys, K, phis, 1.7, 16)
    assert again.loss == batch.loss and np.array_equal(again.grad, batch.grad)


def test_overflow_is_capped():
    sys = DelaySystem([[60.0]], [[1.0]], [[1.0]], 1.0)
    res = batch_loss_and_gradient(sys, [[0.0]], [ONE, ONE], 10.0, 8)
    assert res.loss == CAPPED_LOSS
    assert res.aborted == 2
    assert np.array_equal(res.grad, np.zeros((1, 1)))


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), alpha=st.floats(0.01, 100))
def test_scale_equivariance(seed, alpha):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 4))
    sys = DelaySystem(rng.standard_normal((n, n)), rng.standard_normal((n, 1)),
                      rng.standard_normal((2, n)), 0.5)
    K = rng.uniform(-1, 1, (1, 2))
    phis = [InitialFunction.constant(v, 0.5) for v in rng.standard_normal((3, n))]
    base = batch_loss_and_gradient(sys, K, phis, 1.5, 8)
    scaled = batch_loss_and_gradient(sys, K, [p.scaled(alpha) for p in phis], 1.5, 8)
    assert scaled.loss == pytest.approx(alpha * base.loss, rel=1e-12)
    assert np.allclose(scaled.grad, alpha * base.grad, rtol=1e-10, atol=1e-12 * alpha * base.loss)


def test_sampled_path_gradient_matches_fd(rng):
    sys = DelaySystem(rng.standard_normal((2, 2)), rng.standard_normal((2, 1)),
                      rng.standard_normal((2, 2)), 0.6)
    phi = InitialFunction.sampled(rng.standard_normal((9, 2)), 0.6)
    err, res, fd = gradient_error(sys, [[0.3, -0.4]], phi, 2.0, 32)
    assert res.loss > 1e-3
    assert err < 1e-5


def test_finite_difference_helper_on_closed_form():
    fd = finite_difference_gradient(scalar_loop(0.0), [[-0.5]], ONE, 1.0, 32)
    assert fd[0, 0] == pytest.approx(1.0, abs=1e-8)


def test_rollout_shapes():
    sys = DelaySystem(np.eye(3) * -1, np.ones((3, 2)), np.ones((2, 3)), 0.5)
    losses, grads, aborted = _rollouts(sys, np.zeros((2, 2)),
                                       [InitialFunction.constant(np.ones(3), 0.5)] * 4, 1.0, 8)
    assert losses.shape == (4,) and grads.shape == (4, 2, 2) and aborted == 0
