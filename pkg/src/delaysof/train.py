"""Incremental-horizon gain learning.

Stage k minimizes the sample mean of ||x(k T / M)|| with Adam, starting from
the gain the previous stage ended with, then asks the verifier whether the
current gain already stabilizes the loop. Training stops at the first
verified stage.
"""

from __future__ import annotations

import logging
import time
from dataclasses import asdict, dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .exceptions import DimensionMismatchError, NonfiniteGradientError
from .grad import batch_loss_and_gradient
from .model import DelaySystem, InitialFunction, validate
from .verify import DEFAULT_MARGIN, SpectralReport, is_stable

log = logging.getLogger(__name__)

CONSTANT_SPHERE = "constant-sphere"
SAMPLED_PATH = "sampled-path"
PATH_NODES = 9

Verifier = Callable[[DelaySystem, np.ndarray, float], tuple[bool, SpectralReport]]


# ----------------------------------------------------------------------------
# Adam
# ----------------------------------------------------------------------------

@dataclass(frozen=True)
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0
    lr: float = 0.1
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def fresh(cls, shape, lr: float = 0.1, **kwargs) -> "AdamState":
        return cls(np.zeros(shape), np.zeros(shape), 0, lr, **kwargs)


def adam_step(state: AdamState, K, grad) -> tuple[AdamState, np.ndarray]:
    """One bias-corrected Adam update; returns the new state and gain."""
    K = np.asarray(K, dtype=float)
    g = np.asarray(grad, dtype=float)
    if g.shape != state.m.shape or K.shape != state.m.shape:
        raise DimensionMismatchError(f"expected shape {state.m.shape}, got K {K.shape}, grad {g.shape}")
    if not np.all(np.isfinite(g)):
        raise NonfiniteGradientError("gradient has non-finite entries")
    t = state.t + 1
    m = state.beta1 * state.m + (1 - state.beta1) * g
    v = state.beta2 * state.v + (1 - state.beta2) * g * g
    m_hat = m / (1 - state.beta1 ** t)
    v_hat = v / (1 - state.beta2 ** t)
    K_new = K - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return replace(state, m=m, v=v, t=t), K_new


# ----------------------------------------------------------------------------
# initial-function sampler
# ----------------------------------------------------------------------------

def sample_initial_functions(n: int, h: float, J: int, seed=0, kind: str = CONSTANT_SPHERE) -> list[InitialFunction]:
    """Draw ``J`` histories of unit size, deterministically from ``seed``.

    ``constant-sphere`` gives constant histories uniform on the unit sphere.
    ``sampled-path`` gives smooth random paths: Gaussian node values passed
    once through the cubic B-spline weights (1, 4, 1) / 6, interpolated, and
    scaled to unit sup-norm.
    """
    rng = np.random.default_rng(seed)
    out = []
    if kind == CONSTANT_SPHERE:
        for _ in range(J):
            v = rng.standard_normal(n)
            out.append(InitialFunction.constant(v / np.linalg.norm(v), h))
    elif kind == SAMPLED_PATH:
        for _ in range(J):
            z = rng.standard_normal((PATH_NODES, n))
            padded = np.concatenate([z[:1], z, z[-1:]])
            smooth = (padded[:-2] + 4 * padded[1:-1] + padded[2:]) / 6
            phi = InitialFunction.sampled(smooth, h)
            out.append(phi.scaled(1.0 / phi.sup_norm()))
    else:
        raise ValueError(f"unknown sampler kind {kind!r}")
    return out


# ----------------------------------------------------------------------------
# curriculum
# ----------------------------------------------------------------------------

@dataclass(frozen=True)
class TrainConfig:
    T: float = 20.0
    M: int = 20
    J: int = 10
    batch_size: int | None = None
    epochs_per_stage: int = 50
    r: int = 32
    lr: float = 0.1
    seed: int = 0
    initial_gain: str = "zero"
    init_scale: float = 1.0
    sampler: str = CONSTANT_SPHERE
    verify_margin: float = DEFAULT_MARGIN

    def __post_init__(self):
        if self.batch_size is None:
            object.__setattr__(self, "batch_size", self.J)
        if not self.T > 0:
            raise ValueError(f"T must be positive, got {self.T}")
        for name in ("M", "J", "batch_size", "epochs_per_stage", "r"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.batch_size > self.J:
            raise ValueError(f"batch_size {self.batch_size} exceeds J={self.J}")
        if self.initial_gain not in ("zero", "random"):
            raise ValueError(f"initial_gain must be 'zero' or 'random', got {self.initial_gain!r}")
        if self.sampler not in (CONSTANT_SPHERE, SAMPLED_PATH):
            raise ValueError(f"unknown sampler {self.sampler!r}")
        if not self.verify_margin > 0:
            raise ValueError("verify_margin must be positive")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must fit an unsigned 64-bit integer")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class StageRecord:
    stage: int
    horizon: float
    loss: float
    gain: np.ndarray
    abscissa: float
    verified: bool
    seconds: float = 0.0
    epoch_losses: tuple = ()
    aborted: int = 0

    def to_dict(self, timing: bool = False) -> dict:
        d = {
            "stage": self.stage,
            "horizon": self.horizon,
            "loss": self.loss,
            "gain": self.gain.tolist(),
            "abscissa": self.abscissa,
            "verified": self.verified,
            "aborted": self.aborted,
        }
        if timing:
            d["seconds"] = self.seconds
        return d


@dataclass(frozen=True)
class TrainReport:
    stages: tuple[StageRecord, ...]
    gain: np.ndarray
    terminated_at_stage: int
    success: bool
    config: TrainConfig = field(default_factory=TrainConfig)

    @property
    def seconds(self) -> float:
        return sum(s.seconds for s in self.stages)

    def to_dict(self, timing: bool = False) -> dict:
        """JSON-ready view; wall-clock times only when ``timing`` is set."""
        return {
            "success": self.success,
            "terminated_at_stage": self.terminated_at_stage,
            "gain": self.gain.tolist(),
            "config": self.config.to_dict(),
            "stages": [s.to_dict(timing) for s in self.stages],
        }


def _initial_gain(sys: DelaySystem, cfg: TrainConfig) -> np.ndarray:
    if cfg.initial_gain == "zero":
        return np.zeros(sys.gain_shape)
    rng = np.random.default_rng([cfg.seed, 2])
    return rng.uniform(-cfg.init_scale, cfg.init_scale, sys.gain_shape)


def _default_verifier(sys, K, margin):
    return is_stable(sys, K, margin)


def synthesize(
    sys: DelaySystem,
    cfg: TrainConfig = TrainConfig(),
    verifier: Verifier | None = None,
    phis: Sequence[InitialFunction] | None = None,
) -> TrainReport:
    """Learn a static output-feedback gain by staged gradient descent.

    ``phis`` overrides the sampled initial functions (``cfg.J`` of them are
    drawn otherwise). Non-convergence is reported through ``success``, never
    raised.
    """
    validate(sys)
    verifier = verifier or _default_verifier
    if phis is None:
        phis = sample_initial_functions(sys.n, sys.h, cfg.J, cfg.seed, cfg.sampler)
    phis = list(phis)
    J = len(phis)
    batch_size = min(cfg.batch_size, J)
    shuffle = np.random.default_rng([cfg.seed, 1])

    K = _initial_gain(sys, cfg)
    state = AdamState.fresh(K.shape, lr=cfg.lr)
    records = []
    success = False
    for k in range(1, cfg.M + 1):
        start = time.perf_counter()
        horizon = k * cfg.T / cfg.M
        epoch_losses = []
        for _ in range(cfg.epochs_per_stage):
            order = shuffle.permutation(J)
            total = 0.0
            for b in range(0, J, batch_size):
                batch = [phis[i] for i in order[b:b + batch_size]]
                res = batch_loss_and_gradient(sys, K, batch, horizon, cfg.r)
                total += res.loss * len(batch)
                state, K = adam_step(state, K, res.grad)
            epoch_losses.append(total / J)
        final = batch_loss_and_gradient(sys, K, phis, horizon, cfg.r)
        verified, spec = verifier(sys, K, cfg.verify_margin)
        rec = StageRecord(
            stage=k,
            horizon=horizon,
            loss=final.loss,
            gain=K.copy(),
            abscissa=spec.abscissa,
            verified=bool(verified),
            seconds=time.perf_counter() - start,
            epoch_losses=tuple(epoch_losses),
            aborted=final.aborted,
        )
        records.append(rec)
        log.info("stage %d horizon %.4g loss %.4g abscissa %.4g verified %s",
                 k, horizon, final.loss, spec.abscissa, verified)
        if verified:
            success = True
            break
    return TrainReport(tuple(records), K.copy(), records[-1].stage, success, cfg)
