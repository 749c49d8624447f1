import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError
from sklearn.pipeline import make_pipeline
from sklearn.preprocessing import FunctionTransformer

from delaysof import OutputFeedbackSynthesizer, check_system
from delaysof.model import DelaySystem

PLANT = {"A": [[0.1]], "B": [[1.0]], "C": [[1.0]], "h": 1.0}


def test_get_set_params_roundtrip():
    est = OutputFeedbackSynthesizer(M=5, lr=0.05)
    params = est.get_params()
    assert params["M"] == 5 and params["lr"] == 0.05 and params["T"] == 20.0
    clone(est).set_params(J=4)


def test_fit_transform_score():
    est = OutputFeedbackSynthesizer().fit(PLANT)
    assert est.stable_
    assert est.gain_.shape == (1, 1)
    assert est.score() > 0
    u = est.transform(np.array([[1.0], [2.0]]))
    assert np.allclose(u[:, 0], est.gain_[0, 0] * np.array([1.0, 2.0]))


def test_transform_before_fit():
    with pytest.raises(NotFittedError):
        OutputFeedbackSynthesizer().transform(np.ones((1, 1)))


def test_transform_checks_width():
    est = OutputFeedbackSynthesizer(M=1, epochs_per_stage=1).fit(PLANT)
    with pytest.raises(ValueError):
        est.transform(np.ones((3, 2)))


def test_in_pipeline():
    sys = DelaySystem(np.diag([-1.0, -0.5]), np.eye(2)[:, :1], np.eye(2), 0.2)
    est = OutputFeedbackSynthesizer(M=2, epochs_per_stage=2).fit(sys)
    pipe = make_pipeline(FunctionTransformer(lambda Y: 2 * Y), est)
    out = pipe.transform(np.ones((4, 2)))
    assert out.shape == (4, 1)


def test_check_system_inputs():
    assert check_system(([[0.1]], [[1.0]], [[1.0]], 1.0)).n == 1
    with pytest.raises(TypeError):
        check_system("plant")
