import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import scalar_loop
from delaysof.exceptions import NonfiniteGradientError
from delaysof.model import DelaySystem
from delaysof.train import (
    SAMPLED_PATH,
    AdamState,
    TrainConfig,
    adam_step,
    sample_initial_functions,
    synthesize,
)
from delaysof.verify import is_stable

HAYES_LOW = -1.50774318146657  # a = 0.1, h = 1: b > -sqrt(a^2 + w^2), w = a tan w
HAYES_HIGH = -0.1


def test_adam_first_step():
    state = AdamState.fresh((1, 2), lr=0.1)
    state, K = adam_step(state, np.zeros((1, 2)), np.array([[2.0, 0.0]]))
    assert K[0, 0] == pytest.approx(-0.1 * 2 / (2 + 1e-8), abs=1e-15)
    assert K[0, 1] == 0.0
    assert state.t == 1


def test_adam_zero_gradient_decays_moments():
    state = AdamState(np.array([[0.5]]), np.array([[0.25]]), 3, 0.1)
    new, _ = adam_step(state, np.array([[1.5]]), np.zeros((1, 1)))
    assert new.m[0, 0] == 0.9 * 0.5
    assert new.v[0, 0] == 0.999 * 0.25
    assert new.t == 4


def test_adam_zero_gradient_fresh_state_is_noop():
    state, K = adam_step(AdamState.fresh((2, 2)), np.ones((2, 2)), np.zeros((2, 2)))
    assert np.array_equal(K, np.ones((2, 2)))


def test_adam_constant_gradient_closed_form():
    state = AdamState.fresh((1, 1), lr=0.1)
    K = np.zeros((1, 1))
    for _ in range(2):
        prev = K
        state, K = adam_step(state, K, np.ones((1, 1)))
        assert (K - prev)[0, 0] == pytest.approx(-0.1, abs=1e-6)


@settings(max_examples=40, deadline=None)
@given(c=st.floats(1.0, 1e6), sign=st.sampled_from([-1.0, 1.0]), steps=st.integers(1, 30))
def test_adam_scale_invariance(c, sign, steps):
    state = AdamState.fresh((1, 1), lr=0.1)
    K = np.zeros((1, 1))
    for _ in range(steps):
        prev = K
        state, K = adam_step(state, K, np.full((1, 1), sign * c))
        assert (K - prev)[0, 0] == pytest.approx(-0.1 * sign, abs=1e-4)
    assert np.all(state.v >= 0)


def test_adam_rejects_nonfinite():
    with pytest.raises(NonfiniteGradientError):
        adam_step(AdamState.fresh((1, 1)), np.zeros((1, 1)), np.array([[np.nan]]))


def test_sampler_basics():
    assert sample_initial_functions(3, 1.0, 0, seed=1) == []
    a = sample_initial_functions(3, 0.5, 4, seed=7)
    b = sample_initial_functions(3, 0.5, 4, seed=7)
    assert all(np.array_equal(x.values, y.values) for x, y in zip(a, b))
    for phi in a:
        assert np.linalg.norm(phi(0.0)) == pytest.approx(1.0)


@pytest.mark.parametrize("seed", range(6))
def test_sampler_spans_state_space(seed):
    phis = sample_initial_functions(4, 0.1, 10, seed=seed)
    V = np.stack([phi(0.0) for phi in phis], axis=1)
    assert np.linalg.matrix_rank(V) == 4


def test_sampled_paths_unit_sup_norm():
    phis = sample_initial_functions(2, 0.4, 5, seed=3, kind=SAMPLED_PATH)
    for phi in phis:
        assert phi.sup_norm() == pytest.approx(1.0, abs=1e-12)
        assert phi.kind == "sampled-grid"
    again = sample_initial_functions(2, 0.4, 5, seed=3, kind=SAMPLED_PATH)
    assert all(np.array_equal(x.values, y.values) for x, y in zip(phis, again))


def test_config_validation():
    assert TrainConfig(J=7).batch_size == 7
    with pytest.raises(ValueError):
        TrainConfig(J=3, batch_size=4)
    with pytest.raises(ValueError):
        TrainConfig(T=0)
    with pytest.raises(ValueError):
        TrainConfig(M=0)


def test_scalar_plant_is_stabilized():
    sys = scalar_loop(0.1, 1.0)
    report = synthesize(sys)
    assert report.success
    K = report.gain[0, 0]
    assert HAYES_LOW < K < HAYES_HIGH
    assert report.stages[-1].abscissa < 0
    assert report.terminated_at_stage <= 20
    ok, _ = is_stable(sys, report.gain, report.config.verify_margin)
    assert ok


def test_open_loop_stable_stops_at_first_stage():
    report = synthesize(DelaySystem([[-1.0]], [[1.0]], [[1.0]], 1.0), TrainConfig(epochs_per_stage=3))
    assert report.success and report.terminated_at_stage == 1
    assert abs(report.gain[0, 0]) < 0.5


def test_uncontrollable_unstable_mode_fails():
    cfg = TrainConfig(M=4, epochs_per_stage=5)
    report = synthesize(DelaySystem([[1.0]], [[0.0]], [[1.0]], 1.0), cfg)
    assert not report.success
    assert len(report.stages) == 4
    assert report.terminated_at_stage == 4


def test_stage_horizons_and_finite_losses():
    cfg = TrainConfig(T=6.0, M=3, epochs_per_stage=4, batch_size=3, J=5)
    report = synthesize(DelaySystem([[1.0]], [[0.0]], [[1.0]], 0.5), cfg)
    assert [s.horizon for s in report.stages] == [k * 6.0 / 3 for k in (1, 2, 3)]
    for s in report.stages:
        assert len(s.epoch_losses) == 4
        assert np.all(np.isfinite(s.epoch_losses))


def test_determinism_bit_for_bit():
    sys = DelaySystem([[0.2, 1.0], [-0.5, 0.1]], [[0.0], [1.0]], [[1.0, 0.0], [0.0, 1.0]], 0.5)
    cfg = TrainConfig(T=4.0, M=4, epochs_per_stage=6, J=6, batch_size=4, seed=99,
                      initial_gain="random", init_scale=0.5)
    a = synthesize(sys, cfg)
    b = synthesize(sys, cfg)
    assert len(a.stages) == len(b.stages)
    for x, y in zip(a.stages, b.stages):
        assert np.array_equal(x.gain, y.gain)
        assert x.loss == y.loss
    assert a.to_dict() == b.to_dict()


def test_success_implies_verified():
    sys = scalar_loop(0.1, 1.0)
    report = synthesize(sys, TrainConfig(seed=5))
    assert report.success == report.stages[-1].verified


def test_custom_verifier_controls_stopping():
    calls = []

    def never(sys, K, margin):
        calls.append(K.copy())
        _, rep = is_stable(sys, K, margin)
        return False, rep

    report = synthesize(scalar_loop(-1.0), TrainConfig(M=2, epochs_per_stage=1), verifier=never)
    assert not report.success and len(calls) == 2
