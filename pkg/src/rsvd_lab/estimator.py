"""scikit-learn style wrapper around the randomized low-rank algorithms."""

from dataclasses import replace

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted, validate_data

from .adaptive import AdaptiveConfig, adaptive_rsi
from .sketch import SketchConfig, basic_randomized, improved_small_k, randomized_subspace_iteration

__all__ = ["RandomizedSVD"]

_ALGORITHMS = ("rsi", "basic", "small-k", "adaptive")


class RandomizedSVD(TransformerMixin, BaseEstimator):
    """Truncated SVD by randomized subspace iteration.

    Unlike :class:`sklearn.decomposition.TruncatedSVD` the data are not
    centered, and the fitted object records the number of column
    applications the sketch consumed.

    Parameters
    ----------
    n_components : int
        Target rank ``k``.
    n_oversamples : int
        Extra sample columns, ``ell = k + n_oversamples`` (``ell1`` for
        ``algorithm='small-k'``).
    n_iter : int
        Power steps ``q``.
    algorithm : {'rsi', 'basic', 'small-k', 'adaptive'}
    reorth_period : int
    tau, delta, batch, cmax : float, float, int, int
        Adaptive-only settings.
    random_state : int
        64-bit seed.

    Attributes
    ----------
    components_ : ndarray, shape (n_components, n_features)
    singular_values_ : ndarray, shape (n_components,)
    left_vectors_ : ndarray, shape (n_samples, n_components)
    matvec_count_ : int
    n_features_in_ : int
    """

    def __init__(
        self,
        n_components=2,
        n_oversamples=10,
        n_iter=2,
        algorithm="rsi",
        reorth_period=1,
        tau=1e-6,
        delta=0.1,
        batch=5,
        cmax=200,
        random_state=0,
    ):
        self.n_components = n_components
        self.n_oversamples = n_oversamples
        self.n_iter = n_iter
        self.algorithm = algorithm
        self.reorth_period = reorth_period
        self.tau = tau
        self.delta = delta
        self.batch = batch
        self.cmax = cmax
        self.random_state = random_state

    def _sketch(self, x):
        k = self.n_components
        seed = 0 if self.random_state is None else int(self.random_state)
        if self.algorithm not in _ALGORITHMS:
            raise ValueError(f"algorithm must be one of {_ALGORITHMS}, got {self.algorithm!r}")
        ell = min(k + self.n_oversamples, min(x.shape) - 1)
        if self.algorithm == "basic":
            return basic_randomized(x, k, ell, seed)
        if self.algorithm == "small-k":
            return improved_small_k(x, k, ell, k, self.n_iter, seed)
        if self.algorithm == "adaptive":
            cfg = AdaptiveConfig(k=k, q=self.n_iter, tau=self.tau, delta=self.delta, b=self.batch,
                                 cmax=self.cmax, seed=seed)
            res = adaptive_rsi(x if x.shape[0] >= x.shape[1] else x.T, cfg)
            self.adaptive_status_ = res.trace.status
            ap = res.approx
            if x.shape[0] < x.shape[1]:
                ap = replace(ap, transposed=True)
            return ap
        cfg = SketchConfig(k=k, ell=ell, q=self.n_iter, seed=seed, reorth_period=self.reorth_period)
        return randomized_subspace_iteration(x, cfg)

    def fit(self, X, y=None):
        x = validate_data(self, X, dtype=np.float64, ensure_min_samples=2, ensure_min_features=2)
        if not 1 <= self.n_components < min(x.shape):
            raise ValueError(f"n_components must lie in [1, {min(x.shape) - 1}], got {self.n_components}")
        ap = self._sketch(x)
        self.components_ = ap.right.T
        self.singular_values_ = ap.sigma_hat.copy()
        self.left_vectors_ = ap.left
        self.matvec_count_ = ap.matvec_count
        return self

    def fit_transform(self, X, y=None):
        self.fit(X)
        return self.left_vectors_ * self.singular_values_

    def transform(self, X):
        check_is_fitted(self)
        x = validate_data(self, X, dtype=np.float64, reset=False)
        return x @ self.components_.T

    def inverse_transform(self, X):
        check_is_fitted(self)
        x = check_array(X, dtype=np.float64)
        return x @ self.components_
