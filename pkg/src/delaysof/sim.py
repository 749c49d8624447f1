"""Fixed-step RK4 method of steps for x'(t) = A x(t) + D x(t - h).

The step is ``dt = h / r`` so the delay is exactly ``r`` grid cells and every
derivative breakpoint (t = 0, h, 2h, ...) falls on a node. Delayed values at
the half-step stages come from cubic Hermite interpolation over the past
cell, which is always complete because a stage never looks back less than
``h - dt``.

The same kernel integrates an augmented block state: row 0 is ``x`` and the
optional rows ``1..q-1`` obey

    S_l'(t) = A S_l(t) + D S_l(t - h) + G_l x(t - h),

which is what :mod:`delaysof.grad` uses for forward sensitivities.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numba
import numpy as np

from .exceptions import NonfiniteStateError, OutOfDomainError
from .model import DOMAIN_RTOL, DelaySystem, InitialFunction, delayed_matrix, validate

OVERFLOW = 1e100


def n_steps_for(T: float, dt: float) -> int:
    """Smallest step count whose grid time reaches ``T`` (snapping near-integers)."""
    q = T / dt
    k = round(q)
    if abs(q - k) <= 1e-9 * max(1.0, q):
        return max(int(k), 1)
    return max(int(math.ceil(q)), 1)


@numba.njit(cache=True)
def _field(A, D, G, Z, Zd, out):
    q, n = Z.shape
    for l in range(q):
        for i in range(n):
            acc = 0.0
            for j in range(n):
                acc += A[i, j] * Z[l, j] + D[i, j] * Zd[l, j]
            if l > 0:
                for j in range(n):
                    acc += G[l - 1, i, j] * Zd[0, j]
            out[l, i] = acc


@numba.njit(cache=True)
def _integrate(A, D, G, X, F, hist_mid, r, n_steps, dt):
    """Advance every sample in place; return the first overflowing step per sample (-1 if none).

    X, F: (J, r + 1 + n_steps, q, n) with node indices 0..r holding the history.
    hist_mid: (J, r, n) history of row 0 at the centres of the history cells.
    """
    J, _, q, n = X.shape
    status = np.full(J, -1, dtype=np.int64)
    zmid = np.empty((q, n))
    k1 = np.empty((q, n))
    k2 = np.empty((q, n))
    k3 = np.empty((q, n))
    k4 = np.empty((q, n))
    tmp = np.empty((q, n))
    half = 0.5 * dt
    for s in range(J):
        Xs = X[s]
        Fs = F[s]
        for k in range(n_steps):
            i = k + r
            j = k
            _field(A, D, G, Xs[i], Xs[j], Fs[i])
            if j + 1 <= r:
                for l in range(q):
                    for c in range(n):
                        zmid[l, c] = hist_mid[s, j, c] if l == 0 else 0.0
            else:
                for l in range(q):
                    for c in range(n):
                        zmid[l, c] = 0.5 * (Xs[j, l, c] + Xs[j + 1, l, c]) + dt / 8.0 * (
                            Fs[j, l, c] - Fs[j + 1, l, c]
                        )
            for l in range(q):
                for c in range(n):
                    k1[l, c] = Fs[i, l, c]
                    tmp[l, c] = Xs[i, l, c] + half * k1[l, c]
            _field(A, D, G, tmp, zmid, k2)
            for l in range(q):
                for c in range(n):
                    tmp[l, c] = Xs[i, l, c] + half * k2[l, c]
            _field(A, D, G, tmp, zmid, k3)
            for l in range(q):
                for c in range(n):
                    tmp[l, c] = Xs[i, l, c] + dt * k3[l, c]
            _field(A, D, G, tmp, Xs[j + 1], k4)
            bad = False
            for l in range(q):
                for c in range(n):
                    v = Xs[i, l, c] + dt / 6.0 * (k1[l, c] + 2.0 * k2[l, c] + 2.0 * k3[l, c] + k4[l, c])
                    Xs[i + 1, l, c] = v
                    if not (abs(v) <= OVERFLOW):
                        bad = True
            if bad:
                status[s] = k + 1
                break
        if status[s] < 0:
            last = n_steps + r
            _field(A, D, G, Xs[last], Xs[last - r], Fs[last])
    return status


def _history_block(phis, h: float, r: int, n: int, q: int, n_steps: int):
    """Allocate X, F and the midpoint table with the history filled in."""
    J = len(phis)
    dt = h / r
    grid = np.arange(-r, 1) * dt
    grid[0] = -h
    mids = (np.arange(-r, 0) + 0.5) * dt
    X = np.zeros((J, r + 1 + n_steps, q, n))
    F = np.zeros_like(X)
    hist_mid = np.empty((J, r, n))
    for s, phi in enumerate(phis):
        if phi.dim != n:
            raise OutOfDomainError(f"history has dimension {phi.dim}, system has n={n}")
        X[s, : r + 1, 0] = phi(grid)
        F[s, :r, 0] = phi.derivative(grid[:-1])
        hist_mid[s] = phi(mids)
    return X, F, hist_mid


def _hermite(y0, y1, f0, f1, s, dt):
    s2 = s * s
    s3 = s2 * s
    return (
        (2 * s3 - 3 * s2 + 1) * y0
        + (s3 - 2 * s2 + s) * dt * f0
        + (-2 * s3 + 3 * s2) * y1
        + (s3 - s2) * dt * f1
    )


def _cell(t: float, dt: float, n_steps: int, T_end: float, h: float):
    tol = DOMAIN_RTOL * h
    if t < -tol or t > T_end + tol:
        raise OutOfDomainError(f"t={t} outside [0, {T_end}]")
    t = min(max(t, 0.0), T_end)
    c = min(int(t // dt), n_steps - 1)
    return c, t / dt - c


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Closed-loop solution on the grid ``t_k = k dt``, ``k = -r .. n_steps``.

    ``states[k + r]`` and ``derivs[k + r]`` hold x and x' at ``t_k``. For
    ``k >= 0`` the stored derivative is the vector field itself; in the
    history it is phi'.
    """

    system: DelaySystem
    K: np.ndarray
    phi: InitialFunction
    r: int
    T: float
    states: np.ndarray
    derivs: np.ndarray

    @property
    def h(self) -> float:
        return self.system.h

    @property
    def dt(self) -> float:
        return self.system.h / self.r

    @property
    def n_steps(self) -> int:
        return self.states.shape[0] - self.r - 1

    @property
    def T_end(self) -> float:
        return self.n_steps * self.dt

    @property
    def times(self) -> np.ndarray:
        t = np.arange(-self.r, self.n_steps + 1) * self.dt
        t[0] = -self.h
        return t

    def eval(self, t: float) -> np.ndarray:
        return eval(self, t)

    def to_csv(self, path) -> None:
        write_csv(self, path)


def simulate(sys: DelaySystem, K, phi: InitialFunction, T: float, r: int = 32) -> Trajectory:
    """Integrate the closed loop ``u = K y`` from history ``phi`` to the first node >= T.

    Raises NonfiniteStateError when any state entry exceeds 1e100.
    """
    validate(sys)
    if not T > 0:
        raise OutOfDomainError(f"horizon must be positive, got T={T}")
    if int(r) != r or r < 1:
        raise ValueError(f"r must be a positive integer, got {r}")
    r = int(r)
    D = delayed_matrix(sys, K)
    n = sys.n
    dt = sys.h / r
    n_steps = n_steps_for(T, dt)
    X, F, hist_mid = _history_block([phi], sys.h, r, n, 1, n_steps)
    G = np.zeros((0, n, n))
    status = _integrate(sys.A, D, G, X, F, hist_mid, r, n_steps, dt)
    if status[0] >= 0:
        raise NonfiniteStateError(status[0] * dt)
    states = X[0, :, 0]
    derivs = F[0, :, 0]
    states.setflags(write=False)
    derivs.setflags(write=False)
    K = np.array(K, dtype=float).reshape(sys.gain_shape)
    return Trajectory(sys, K, phi, r, float(T), states, derivs)


def eval(traj: Trajectory, t: float) -> np.ndarray:  # noqa: A001 - mirrors the operation name
    """Dense output at time ``t`` in ``[-h, T_end]``."""
    tol = DOMAIN_RTOL * traj.h
    if t < -traj.h - tol:
        raise OutOfDomainError(f"t={t} precedes the history")
    if t < 0:
        return traj.phi(t)
    c, s = _cell(t, traj.dt, traj.n_steps, traj.T_end, traj.h)
    i = c + traj.r
    if s <= 1e-12:
        return traj.states[i].copy()
    if s >= 1.0 - 1e-12:
        return traj.states[i + 1].copy()
    return _hermite(traj.states[i], traj.states[i + 1], traj.derivs[i], traj.derivs[i + 1], s, traj.dt)


def terminal_norm(traj: Trajectory, T: float) -> float:
    """Euclidean norm of x(T)."""
    return float(np.linalg.norm(eval(traj, T)))


def write_csv(traj: Trajectory, path) -> None:
    """``t,x1,...,xn`` with one row per grid node, 17 significant digits."""
    n = traj.states.shape[1]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t"] + [f"x{i + 1}" for i in range(n)])
        for t, x in zip(traj.times, traj.states):
            w.writerow([f"{t:.17g}"] + [f"{v:.17g}" for v in x])


def history_from(traj: Trajectory, s: float) -> InitialFunction:
    """Hermite history on ``[s - h, s]`` read off a trajectory; ``s`` must be a node >= h."""
    k = s / traj.dt
    if abs(k - round(k)) > 1e-9 * max(1.0, k) or s < traj.h - DOMAIN_RTOL * traj.h:
        raise OutOfDomainError("restart time must be a grid node at or after h")
    i = int(round(k)) + traj.r
    rows = slice(i - traj.r, i + 1)
    return InitialFunction.sampled(traj.states[rows], traj.h, traj.derivs[rows])
