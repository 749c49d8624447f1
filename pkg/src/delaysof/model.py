"""Open-loop time-delay systems, feedback gains and initial histories.

The plant is

    x'(t) = A x(t) + B u(t - h),    y(t) = C x(t),

and the static output feedback ``u = K y`` closes the loop into

    x'(t) = A x(t) + D x(t - h),    D = B K C.

Everything the integrator and the verifier need from the gain is carried by
``D``; :func:`delayed_matrix` builds it once per gain.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
from scipy.interpolate import CubicHermiteSpline, CubicSpline

from .exceptions import (
    DimensionMismatchError,
    NonfiniteEntryError,
    NonpositiveDelayError,
    OutOfDomainError,
)

# Relative slack (in units of h) accepted at the ends of [-h, 0].
DOMAIN_RTOL = 1e-12


def _as_matrix(value, role: str) -> np.ndarray:
    arr = np.array(value, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        if role == "B":
            arr = arr.reshape(-1, 1)
        elif role == "C" or role == "K":
            arr = arr.reshape(1, -1)
        elif arr.size == 1:
            arr = arr.reshape(1, 1)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class DelaySystem:
    """Matrices ``A`` (n x n), ``B`` (n x m), ``C`` (p x n) and delay ``h``.

    Scalars and flat lists are promoted to matrices (``B`` to a column,
    ``C`` to a row). No validation happens here; call :func:`validate`.
    """

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    h: float

    def __post_init__(self):
        object.__setattr__(self, "A", _as_matrix(self.A, "A"))
        object.__setattr__(self, "B", _as_matrix(self.B, "B"))
        object.__setattr__(self, "C", _as_matrix(self.C, "C"))
        object.__setattr__(self, "h", float(self.h))

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    @property
    def p(self) -> int:
        return self.C.shape[0]

    @property
    def gain_shape(self) -> tuple[int, int]:
        return (self.m, self.p)

    def __eq__(self, other):
        if not isinstance(other, DelaySystem):
            return NotImplemented
        return (
            self.h == other.h
            and np.array_equal(self.A, other.A)
            and np.array_equal(self.B, other.B)
            and np.array_equal(self.C, other.C)
        )

    def __hash__(self):
        return hash((self.h, self.A.tobytes(), self.B.tobytes(), self.C.tobytes()))


def validate(sys: DelaySystem) -> bool:
    """Return True if ``sys`` is well formed, otherwise raise.

    Raises
    ------
    DimensionMismatchError, NonpositiveDelayError, NonfiniteEntryError
    """
    A, B, C = sys.A, sys.B, sys.C
    if A.ndim != 2 or B.ndim != 2 or C.ndim != 2:
        raise DimensionMismatchError("A, B and C must be matrices")
    n = A.shape[0]
    if n < 1 or A.shape != (n, n):
        raise DimensionMismatchError(f"A must be square and nonempty, got {A.shape}")
    if B.shape[0] != n or B.shape[1] < 1:
        raise DimensionMismatchError(f"B must be {n} x m with m >= 1, got {B.shape}")
    if C.shape[1] != n or C.shape[0] < 1:
        raise DimensionMismatchError(f"C must be p x {n} with p >= 1, got {C.shape}")
    if not np.isfinite(sys.h):
        raise NonfiniteEntryError("delay is not finite")
    if sys.h <= 0:
        raise NonpositiveDelayError(f"delay must be positive, got h={sys.h}")
    for name, mat in (("A", A), ("B", B), ("C", C)):
        if not np.all(np.isfinite(mat)):
            raise NonfiniteEntryError(f"{name} has non-finite entries")
    return True


def check_gain(sys: DelaySystem, K) -> np.ndarray:
    """Coerce ``K`` to a finite float matrix of shape (m, p)."""
    K = np.array(K, dtype=float)
    if K.ndim < 2:
        K = K.reshape(sys.gain_shape) if K.size == sys.m * sys.p else K
    if K.shape != sys.gain_shape:
        raise DimensionMismatchError(f"gain must be {sys.gain_shape}, got {K.shape}")
    if not np.all(np.isfinite(K)):
        raise NonfiniteEntryError("gain has non-finite entries")
    return K


def delayed_matrix(sys: DelaySystem, K) -> np.ndarray:
    """Closed-loop delayed coefficient ``D = B K C`` (n x n)."""
    K = check_gain(sys, K)
    return sys.B @ K @ sys.C


# ----------------------------------------------------------------------------
# initial histories
# ----------------------------------------------------------------------------

CONSTANT = "constant"
LINEAR = "linear"
SAMPLED = "sampled-grid"


@dataclass(frozen=True, eq=False)
class InitialFunction:
    """A continuous history on ``[-h, 0]``.

    Build with :meth:`constant`, :meth:`linear` or :meth:`sampled`. Sampled
    histories hold values on a uniform grid from ``-h`` to ``0``; they are
    interpolated with a not-a-knot cubic spline, or with a cubic Hermite
    spline when node derivatives are given.
    """

    kind: str
    h: float
    values: np.ndarray
    slopes: np.ndarray | None = None
    _interp: Any = field(default=None, repr=False)

    @classmethod
    def constant(cls, value, h: float) -> "InitialFunction":
        v = np.atleast_1d(np.array(value, dtype=float))
        return cls(CONSTANT, float(h), v)

    @classmethod
    def linear(cls, offset, slope, h: float) -> "InitialFunction":
        """``phi(theta) = offset + theta * slope``."""
        v0 = np.atleast_1d(np.array(offset, dtype=float))
        v1 = np.atleast_1d(np.array(slope, dtype=float))
        if v0.shape != v1.shape:
            raise DimensionMismatchError("offset and slope differ in length")
        return cls(LINEAR, float(h), v0, v1)

    @classmethod
    def sampled(cls, values, h: float, slopes=None) -> "InitialFunction":
        """Values (and optionally derivatives) on ``len(values)`` uniform nodes over [-h, 0]."""
        vals = np.array(values, dtype=float)
        if vals.ndim == 1:
            vals = vals[:, None]
        if vals.shape[0] < 2:
            raise DimensionMismatchError("a sampled history needs at least two nodes")
        nodes = np.linspace(-float(h), 0.0, vals.shape[0])
        if slopes is not None:
            slopes = np.array(slopes, dtype=float).reshape(vals.shape)
            interp = CubicHermiteSpline(nodes, vals, slopes, axis=0)
        elif vals.shape[0] >= 4:
            interp = CubicSpline(nodes, vals, axis=0, bc_type="not-a-knot")
        else:
            # too few nodes for not-a-knot; fall back to a lower-order fit
            interp = CubicSpline(nodes, vals, axis=0, bc_type="natural")
        return cls(SAMPLED, float(h), vals, slopes, interp)

    def __post_init__(self):
        if not self.h > 0:
            raise NonpositiveDelayError(f"history length must be positive, got {self.h}")
        for arr in (self.values, self.slopes):
            if arr is not None:
                if not np.all(np.isfinite(arr)):
                    raise NonfiniteEntryError("history data has non-finite entries")
                arr.setflags(write=False)

    @property
    def dim(self) -> int:
        return self.values.shape[-1]

    def _check(self, theta):
        theta = np.asarray(theta, dtype=float)
        tol = DOMAIN_RTOL * self.h
        if np.any(theta < -self.h - tol) or np.any(theta > tol):
            raise OutOfDomainError(f"history evaluated outside [-{self.h}, 0]")
        return np.clip(theta, -self.h, 0.0)

    def __call__(self, theta):
        """phi(theta); a vector for scalar theta, rows for an array."""
        theta = self._check(theta)
        if self.kind == CONSTANT:
            return np.broadcast_to(self.values, theta.shape + (self.dim,)).copy()
        if self.kind == LINEAR:
            return self.values + theta[..., None] * self.slopes
        return self._interp(theta)

    def derivative(self, theta):
        theta = self._check(theta)
        if self.kind == CONSTANT:
            return np.zeros(theta.shape + (self.dim,))
        if self.kind == LINEAR:
            return np.broadcast_to(self.slopes, theta.shape + (self.dim,)).copy()
        return self._interp(theta, 1)

    def scaled(self, alpha: float) -> "InitialFunction":
        if self.kind == CONSTANT:
            return InitialFunction.constant(alpha * self.values, self.h)
        if self.kind == LINEAR:
            return InitialFunction.linear(alpha * self.values, alpha * self.slopes, self.h)
        slopes = None if self.slopes is None else alpha * self.slopes
        return InitialFunction.sampled(alpha * self.values, self.h, slopes)

    def sup_norm(self, resolution: int = 257) -> float:
        """max over theta of the Euclidean norm, sampled on a fine grid."""
        if self.kind == CONSTANT:
            return float(np.linalg.norm(self.values))
        theta = np.linspace(-self.h, 0.0, resolution)
        return float(np.max(np.linalg.norm(self(theta), axis=-1)))


def eval_history(phi: InitialFunction, theta: float) -> np.ndarray:
    """phi(theta) for theta in [-h, 0]."""
    return phi(theta)


# ----------------------------------------------------------------------------
# JSON document shared by the command line tools
# ----------------------------------------------------------------------------

def system_to_dict(sys: DelaySystem, K=None) -> dict:
    doc = {"A": sys.A.tolist(), "B": sys.B.tolist(), "C": sys.C.tolist(), "h": sys.h}
    if K is not None:
        doc["K"] = np.asarray(K, dtype=float).tolist()
    return doc


def system_from_dict(doc: dict) -> tuple[DelaySystem, np.ndarray | None]:
    """Parse ``{"A", "B", "C", "h"[, "K"]}``; the gain is None when absent."""
    unknown = set(doc) - {"A", "B", "C", "h", "K"}
    if unknown:
        raise DimensionMismatchError(f"unexpected keys in system document: {sorted(unknown)}")
    missing = {"A", "B", "C", "h"} - set(doc)
    if missing:
        raise DimensionMismatchError(f"system document lacks {sorted(missing)}")
    sys = DelaySystem(doc["A"], doc["B"], doc["C"], doc["h"])
    validate(sys)
    K = check_gain(sys, doc["K"]) if "K" in doc else None
    return sys, K


def load_system(path) -> tuple[DelaySystem, np.ndarray | None]:
    with open(path) as fh:
        return system_from_dict(json.load(fh))


def dump_system(path, sys: DelaySystem, K=None) -> None:
    Path(path).write_text(json.dumps(system_to_dict(sys, K), indent=2) + "\n")
