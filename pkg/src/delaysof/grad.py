"""Loss ||x(T)|| and its exact gradient with respect to the gain.

Each gain entry K_ij gets a sensitivity S_ij = dx/dK_ij integrated on the
same grid and with the same interpolants as x, so the gradient is exact for
the discretized map (up to rounding) rather than an approximation of the
continuous one.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .exceptions import EmptyBatchError
from .model import DelaySystem, InitialFunction, check_gain, delayed_matrix, validate
from .sim import _hermite, _history_block, _integrate, n_steps_for

CAPPED_LOSS = 1e6
# below this terminal norm the gradient is set to zero (cone point of the norm)
ZERO_NORM = 1e-12


@dataclass(frozen=True)
class GradientResult:
    loss: float
    grad: np.ndarray
    aborted: int = 0


def _gain_directions(sys: DelaySystem) -> np.ndarray:
    """Stack of B E_ij C for all (i, j), row-major in the gain."""
    m, p = sys.gain_shape
    G = np.empty((m * p, sys.n, sys.n))
    for i in range(m):
        for j in range(p):
            G[i * p + j] = np.outer(sys.B[:, i], sys.C[j, :])
    return G


def _rollouts(sys: DelaySystem, K, phis: Sequence[InitialFunction], T: float, r: int):
    """Per-sample losses (J,) and gradients (J, m, p), plus the overflow count."""
    validate(sys)
    K = check_gain(sys, K)
    if not T > 0:
        raise ValueError(f"horizon must be positive, got T={T}")
    r = int(r)
    D = delayed_matrix(sys, K)
    G = _gain_directions(sys)
    n, q = sys.n, 1 + G.shape[0]
    dt = sys.h / r
    n_steps = n_steps_for(T, dt)
    X, F, hist_mid = _history_block(phis, sys.h, r, n, q, n_steps)
    status = _integrate(sys.A, D, G, X, F, hist_mid, r, n_steps, dt)

    c = min(int(T // dt), n_steps - 1)
    s = T / dt - c
    i = c + r
    J = len(phis)
    losses = np.empty(J)
    grads = np.zeros((J,) + sys.gain_shape)
    for k in range(J):
        if status[k] >= 0:
            losses[k] = CAPPED_LOSS
            continue
        Z = _hermite(X[k, i], X[k, i + 1], F[k, i], F[k, i + 1], s, dt)
        x, S = Z[0], Z[1:]
        norm = float(np.linalg.norm(x))
        losses[k] = norm
        if norm >= ZERO_NORM:
            grads[k] = (S @ x / norm).reshape(sys.gain_shape)
    return losses, grads, int(np.sum(status >= 0))


def loss_and_gradient(sys: DelaySystem, K, phi: InitialFunction, T: float, r: int = 32) -> GradientResult:
    losses, grads, aborted = _rollouts(sys, K, [phi], T, r)
    return GradientResult(float(losses[0]), grads[0], aborted)


def batch_loss_and_gradient(
    sys: DelaySystem, K, phis: Sequence[InitialFunction], T: float, r: int = 32
) -> GradientResult:
    """Monte-Carlo mean of ||x(T)|| and its gradient over ``phis``.

    Samples are reduced in index order, so the result does not depend on how
    the rollouts were scheduled.
    """
    if len(phis) == 0:
        raise EmptyBatchError("batch of initial functions is empty")
    losses, grads, aborted = _rollouts(sys, K, list(phis), T, r)
    J = len(phis)
    loss = 0.0
    grad = np.zeros(sys.gain_shape)
    for k in range(J):
        loss += losses[k]
        grad += grads[k]
    return GradientResult(loss / J, grad / J, aborted)


def finite_difference_gradient(sys, K, phi, T, r=32, eps=1e-5) -> np.ndarray:
    """Central differences of the discretized loss, one gain entry at a time."""
    K = check_gain(sys, K)
    fd = np.zeros_like(K)
    for idx in np.ndindex(*K.shape):
        Kp = K.copy()
        Km = K.copy()
        Kp[idx] += eps
        Km[idx] -= eps
        fp = loss_and_gradient(sys, Kp, phi, T, r).loss
        fm = loss_and_gradient(sys, Km, phi, T, r).loss
        fd[idx] = (fp - fm) / (2 * eps)
    return fd


def gradient_error(sys, K, phi, T, r=32, eps=1e-5) -> tuple[float, GradientResult, np.ndarray]:
    """Max entrywise gradient mismatch, normalized by the largest FD entry."""
    res = loss_and_gradient(sys, K, phi, T, r)
    fd = finite_difference_gradient(sys, K, phi, T, r, eps)
    scale = max(float(np.max(np.abs(fd))), np.finfo(float).tiny)
    return float(np.max(np.abs(res.grad - fd)) / scale), res, fd
