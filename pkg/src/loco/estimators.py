"""Scikit-learn style wrappers so the rotations compose with pipelines.

``LowRankRotation`` is a transformer: it draws (or is handed) a seeded
rotation chain at fit time and rotates feature rows on transform.
``OrthogonalAdapterRegressor`` is the fine-tuning estimator: it freezes a
base linear map and fits the rotation factors to the targets by gradient
descent.  Both follow the usual conventions (``get_params``/``set_params``
via ``BaseEstimator``, trailing-underscore fitted attributes, sklearn
input validation).
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .adapter import LocoAdapter, train_adapter
from .cayley import apply_rotation, transpose_core
from .chain import (MODE_EXACT, MODE_FIRST_ORDER, RotationChain, build_cores,
                    random_chain)
from .rng import Rng
from .skew import init_factors


class LowRankRotation(TransformerMixin, BaseEstimator):
    """Orthogonal rotation of feature vectors from low-rank skew factors.

    Parameters
    ----------
    rank : int
        Rank of each component's factor pair (2 * rank columns per
        auxiliary block).
    n_components : int
        Number of chained rotations.
    scale : float
        Std of the Gaussian factors drawn at fit time; controls how far
        the rotation sits from the identity.
    mode : {"exact", "first_order"}
        Exact sequential composition or the parallel first-order form.
    temperature : float
        Adaptation strength multiplier on every skew generator.
    random_state : int
        Seed for the factor draw.
    """

    def __init__(self, rank: int = 2, n_components: int = 1,
                 scale: float = 0.1, mode: str = MODE_EXACT,
                 temperature: float = 1.0, random_state: int = 0):
        self.rank = rank
        self.n_components = n_components
        self.scale = scale
        self.mode = mode
        self.temperature = temperature
        self.random_state = random_state

    def fit(self, X, y=None):
        X = check_array(X, dtype=np.float64)
        self.n_features_in_ = X.shape[1]
        self.chain_ = random_chain(Rng(self.random_state),
                                   d=self.n_features_in_, r=self.rank,
                                   n=self.n_components, std=self.scale,
                                   mode=self.mode,
                                   temperature=self.temperature)
        return self

    def transform(self, X):
        check_is_fitted(self, "chain_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(
                f"X has {X.shape[1]} features, expected {self.n_features_in_}"
            )
        return self.chain_.apply(X)

    def inverse_transform(self, X):
        """Undo the rotation (exact mode only, where the inverse is R^T)."""
        check_is_fitted(self, "chain_")
        if self.mode != MODE_EXACT:
            raise ValueError("inverse_transform requires exact mode")
        X = check_array(X, dtype=np.float64)
        out = X
        for core in reversed(build_cores(self.chain_)):
            out = apply_rotation(transpose_core(core), out)
        return out


class OrthogonalAdapterRegressor(RegressorMixin, BaseEstimator):
    """Fine-tune a frozen linear map by rotating its input space.

    Fits factor pairs so that ``X`` rotated through the chain and passed
    through the frozen weight matches ``y`` in least squares.  With no
    weight given the base map is the identity, i.e. the estimator solves
    a low-rank orthogonal Procrustes problem.

    Parameters
    ----------
    weight : ndarray of shape (k, d), optional
        Frozen base map; identity when omitted (requires y to have d
        columns).
    rank, n_components : int
        Capacity of the rotation chain.
    steps : int
        Full-batch gradient descent steps.
    lr : float
        Learning rate.
    init_std : float
        Std of the Gaussian factor half at init (the other half starts
        at zero, so training starts from the identity rotation).
    random_state : int
        Seed for the factor init.
    """

    def __init__(self, weight=None, rank: int = 2, n_components: int = 2,
                 steps: int = 1000, lr: float = 16.0, init_std: float = 0.02,
                 random_state: int = 0):
        self.weight = weight
        self.rank = rank
        self.n_components = n_components
        self.steps = steps
        self.lr = lr
        self.init_std = init_std
        self.random_state = random_state

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=np.float64, multi_output=True)
        if y.ndim == 1:
            y = y[:, None]
        d = X.shape[1]
        if self.weight is not None:
            w0 = np.asarray(self.weight, dtype=np.float64)
        else:
            if y.shape[1] != d:
                raise ValueError(
                    "without an explicit weight the base map is the identity, "
                    f"so y must have {d} columns (got {y.shape[1]})"
                )
            w0 = np.eye(d)
        rng = Rng(self.random_state)
        chain = RotationChain(
            [init_factors(rng.split(i), d, self.rank, self.init_std)
             for i in range(self.n_components)],
            mode=MODE_FIRST_ORDER,
        )
        self.adapter_ = LocoAdapter(w0, chain)
        self.loss_trace_ = train_adapter(self.adapter_, X, y, self.steps, self.lr)
        self.n_features_in_ = d
        return self

    def predict(self, X):
        check_is_fitted(self, "adapter_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(
                f"X has {X.shape[1]} features, expected {self.n_features_in_}"
            )
        out = self.adapter_.forward(X)
        return out.ravel() if out.shape[1] == 1 else out
