"""Spectral stability certificate for x'(t) = A x(t) + D x(t - h).

The infinitesimal generator of the solution semigroup acts on histories
on [-h, 0]; collocating it at Chebyshev-Gauss-Lobatto nodes gives a matrix
whose rightmost eigenvalues converge spectrally fast to the rightmost
characteristic roots of det(lambda I - A - D exp(-lambda h)) = 0.

Chebyshev collocation also produces spurious eigenvalues of modulus
O(N / h) that move as N changes. Only eigenvalues inside the disk
``|lambda| h <= N / 2`` are treated as resolved. Every root with
Re(lambda) >= 0 satisfies ``|lambda| <= ||A|| + ||D||``, so an order whose
disk does not cover that bound is skipped as too coarse.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .model import DelaySystem, delayed_matrix, validate

MATCH_TOL = 1e-6
ESCALATION = (16, 24, 36)
DEFAULT_Q = 10
DEFAULT_MARGIN = 1e-3


@dataclass(frozen=True)
class SpectralReport:
    N: int
    rightmost_roots: tuple = field(default_factory=tuple)
    abscissa: float = math.inf
    converged: bool = False
    stable: bool = False

    def to_dict(self) -> dict:
        return {
            "N": self.N,
            "abscissa": self.abscissa,
            "roots": [[z.real, z.imag] for z in self.rightmost_roots],
            "converged": self.converged,
            "stable": self.stable,
        }


def chebyshev_nodes(N: int, h: float) -> tuple[np.ndarray, np.ndarray]:
    """CGL nodes ``0 = theta_0 > ... > theta_N = -h`` and the differentiation matrix on them."""
    x = np.cos(np.pi * np.arange(N + 1) / N)
    c = np.ones(N + 1)
    c[0] = c[-1] = 2.0
    c *= (-1.0) ** np.arange(N + 1)
    dX = x[:, None] - x[None, :]
    Dm = np.outer(c, 1.0 / c) / (dX + np.eye(N + 1))
    Dm -= np.diag(Dm.sum(axis=1))
    theta = 0.5 * h * (x - 1.0)
    return theta, Dm * (2.0 / h)


def generator_matrix(sys: DelaySystem, K, N: int) -> np.ndarray:
    """Collocated generator, size (N+1) n square, node-major blocks."""
    if N < 2:
        raise ValueError(f"collocation order must be >= 2, got N={N}")
    n = sys.n
    D = delayed_matrix(sys, K)
    _, Dm = chebyshev_nodes(N, sys.h)
    L = np.zeros(((N + 1) * n, (N + 1) * n))
    L[:n, :n] = sys.A
    L[:n, N * n:] = D
    L[n:, :] = np.kron(Dm[1:], np.eye(n))
    return L


def _rightmost(eigs: np.ndarray, q: int) -> np.ndarray:
    order = np.lexsort((-eigs.imag, -eigs.real))
    top = eigs[order][:q]
    # drop a conjugate partner cut off by the count limit
    if len(top) and abs(top[-1].imag) > 0 and len(top) < len(eigs):
        partner = np.conj(top[-1])
        if not np.any(np.abs(top[:-1] - partner) <= 1e-9 * max(1.0, abs(partner))):
            top = top[:-1]
    return top


def _resolved(eigs: np.ndarray, N: int, h: float) -> np.ndarray:
    return eigs[np.abs(eigs) * h <= 0.5 * N]


def _match(a: np.ndarray, b: np.ndarray) -> float:
    """Worst distance from each point of ``a`` to its assigned partner in ``b``."""
    if len(a) == 0:
        return 0.0
    if len(b) < len(a):
        return math.inf
    cost = np.abs(a[:, None] - b[None, :])
    rows, cols = linear_sum_assignment(cost)
    return float(cost[rows, cols].max())


def spectral_abscissa(sys: DelaySystem, K, N: int = 16, q: int = DEFAULT_Q, margin: float = DEFAULT_MARGIN) -> SpectralReport:
    """Rightmost roots at orders N and ceil(1.5 N), with a convergence flag."""
    if N < 8:
        raise ValueError(f"order must be >= 8, got N={N}")
    validate(sys)
    N_hi = math.ceil(1.5 * N)
    D = delayed_matrix(sys, K)
    bound = np.linalg.norm(sys.A, 2) + np.linalg.norm(D, 2)
    try:
        eig_lo = np.linalg.eigvals(generator_matrix(sys, K, N))
        eig_hi = np.linalg.eigvals(generator_matrix(sys, K, N_hi))
    except np.linalg.LinAlgError:
        return SpectralReport(N_hi)
    if not (np.all(np.isfinite(eig_lo)) and np.all(np.isfinite(eig_hi))):
        return SpectralReport(N_hi)

    lo = _rightmost(_resolved(eig_lo, N, sys.h), q)
    # same disk at the higher order so both sets describe the same region
    hi = _rightmost(_resolved(eig_hi, N, sys.h), q)
    if len(hi) == 0:
        return SpectralReport(N_hi)
    covered = bound * sys.h <= 0.5 * N
    converged = (
        covered
        and _match(lo, eig_hi) <= MATCH_TOL
        and _match(hi, eig_lo) <= MATCH_TOL
    )
    abscissa = float(hi.real.max())
    stable = bool(converged and abscissa < -margin)
    return SpectralReport(N_hi, tuple(complex(z) for z in hi), abscissa, bool(converged), stable)


def is_stable(sys: DelaySystem, K, margin: float = DEFAULT_MARGIN, q: int = DEFAULT_Q,
              orders=ESCALATION) -> tuple[bool, SpectralReport]:
    """True iff a converged spectrum sits left of ``-margin``.

    Orders are tried in sequence until two consecutive discretizations
    agree; an exhausted escalation counts as not stable.
    """
    if not margin > 0:
        raise ValueError(f"margin must be positive, got {margin}")
    report = None
    for N in orders:
        report = spectral_abscissa(sys, K, N, q, margin)
        if report.converged:
            break
    return report.stable, report
