"""scikit-learn style front end.

:class:`OutputFeedbackSynthesizer` learns a gain from a plant in ``fit`` and
then acts as a transformer from measured outputs ``y`` to control inputs
``u = K y``, so a learned controller can sit inside a Pipeline.
"""

from __future__ import annotations

from collections.abc import Mapping

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .model import DelaySystem, system_from_dict, validate
from .train import CONSTANT_SPHERE, TrainConfig, synthesize
from .verify import is_stable


def check_system(X) -> DelaySystem:
    """Accept a DelaySystem, its JSON mapping, or an ``(A, B, C, h)`` tuple."""
    if isinstance(X, DelaySystem):
        sys = X
    elif isinstance(X, Mapping):
        sys, _ = system_from_dict(dict(X))
    elif isinstance(X, (tuple, list)) and len(X) == 4:
        sys = DelaySystem(*X)
    else:
        raise TypeError(f"expected a DelaySystem, mapping or (A, B, C, h), got {type(X).__name__}")
    validate(sys)
    return sys


class OutputFeedbackSynthesizer(TransformerMixin, BaseEstimator):
    """Static output-feedback gain for a linear plant with input delay.

    Parameters mirror :class:`delaysof.train.TrainConfig`.

    Attributes
    ----------
    gain_ : ndarray of shape (m, p)
    report_ : TrainReport
    spectrum_ : SpectralReport of the closed loop with ``gain_``
    stable_ : bool
    n_features_in_ : int
        Output dimension p expected by :meth:`transform`.
    """

    def __init__(self, T=20.0, M=20, J=10, batch_size=None, epochs_per_stage=50, r=32,
                 lr=0.1, seed=0, initial_gain="zero", init_scale=1.0,
                 sampler=CONSTANT_SPHERE, verify_margin=1e-3):
        self.T = T
        self.M = M
        self.J = J
        self.batch_size = batch_size
        self.epochs_per_stage = epochs_per_stage
        self.r = r
        self.lr = lr
        self.seed = seed
        self.initial_gain = initial_gain
        self.init_scale = init_scale
        self.sampler = sampler
        self.verify_margin = verify_margin

    def _config(self) -> TrainConfig:
        return TrainConfig(**self.get_params())

    def fit(self, X, y=None):
        sys = check_system(X)
        self.system_ = sys
        self.report_ = synthesize(sys, self._config())
        self.gain_ = self.report_.gain
        self.stable_, self.spectrum_ = is_stable(sys, self.gain_, self.verify_margin)
        self.n_features_in_ = sys.p
        return self

    def transform(self, X):
        """Map output samples (n_samples, p) to inputs (n_samples, m)."""
        check_is_fitted(self, "gain_")
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        return X @ self.gain_.T

    def score(self, X=None, y=None):
        """Negative spectral abscissa of the loop closed with the fitted gain."""
        check_is_fitted(self, "gain_")
        sys = self.system_ if X is None else check_system(X)
        _, spec = is_stable(sys, self.gain_, self.verify_margin)
        return -spec.abscissa
