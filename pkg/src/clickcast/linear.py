"""Least-squares linear regression with an optional ridge penalty.

The objective is sum((y - Xw - b)^2) + ridge_epsilon * ||w||^2 with an
unpenalised intercept, solved on centred data.  A rank-deficient design with
epsilon zero is automatically refit with a tiny epsilon instead of crashing,
because one-hot columns routinely go constant inside tree leaves; positive
epsilon is solved through an augmented least-squares system so the fit stays
finite even when the Gram matrix would be numerically singular.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

__all__ = ["DEFAULT_RIDGE_EPSILON", "LinearModel", "LinearRegressor", "fit_linear"]

DEFAULT_RIDGE_EPSILON = 1e-8


@dataclass(frozen=True)
class LinearModel:
    """Fitted coefficients, intercept, and the epsilon used at fit time."""

    coefficients: np.ndarray
    intercept: float
    ridge_epsilon: float = 0.0

    def __post_init__(self) -> None:
        coef = np.asarray(self.coefficients, dtype=np.float64)
        object.__setattr__(self, "coefficients", coef)
        if coef.ndim != 1:
            raise ValueError("coefficients must be one-dimensional")

    def predict(self, X) -> np.ndarray | float:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            if X.shape[0] != self.coefficients.shape[0]:
                raise ValueError(
                    f"expected {self.coefficients.shape[0]} features, got {X.shape[0]}"
                )
            return float(X @ self.coefficients + self.intercept)
        if X.shape[1] != self.coefficients.shape[0]:
            raise ValueError(
                f"expected {self.coefficients.shape[0]} features, got {X.shape[1]}"
            )
        return X @ self.coefficients + self.intercept


def fit_linear(X, y, ridge_epsilon: float = 0.0) -> LinearModel:
    """Fit the penalised least-squares model.

    With ``ridge_epsilon == 0`` the solution comes from an exact
    least-squares solve; if the centred design turns out rank deficient the
    fit is repeated with the default tiny epsilon and a warning, so the
    returned coefficients are always finite.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError("X must be a 2d array")
    if y.ndim != 1 or y.shape[0] != X.shape[0]:
        raise ValueError("y must be 1d with one target per row of X")
    if X.shape[0] < 1:
        raise ValueError("need at least one row")
    if ridge_epsilon < 0:
        raise ValueError("ridge_epsilon must be >= 0")
    n, d = X.shape
    y_mean = float(y.mean())
    if d == 0:
        return LinearModel(np.zeros(0), y_mean, ridge_epsilon)
    x_mean = X.mean(axis=0)
    Xc = X - x_mean
    yc = y - y_mean
    if ridge_epsilon == 0.0:
        w, _, rank, _ = np.linalg.lstsq(Xc, yc, rcond=None)
        if rank < d:
            warnings.warn(
                "rank-deficient design with ridge_epsilon=0; refitting with "
                f"epsilon {DEFAULT_RIDGE_EPSILON}",
                RuntimeWarning,
                stacklevel=2,
            )
            return fit_linear(X, y, DEFAULT_RIDGE_EPSILON)
    else:
        # Solve the ridge objective through the augmented system
        # [Xc; sqrt(eps)*I] w = [yc; 0] rather than the normal equations: the
        # Gram matrix of a large, collinear design can absorb a tiny epsilon
        # into float rounding and come out exactly singular.
        aug = np.vstack([Xc, np.sqrt(ridge_epsilon) * np.eye(d)])
        rhs = np.concatenate([yc, np.zeros(d)])
        w = np.linalg.lstsq(aug, rhs, rcond=None)[0]
    intercept = y_mean - float(x_mean @ w)
    return LinearModel(coefficients=w, intercept=intercept, ridge_epsilon=ridge_epsilon)


class LinearRegressor(RegressorMixin, BaseEstimator):
    """Estimator wrapper around :func:`fit_linear`."""

    def __init__(self, ridge_epsilon: float = 0.0):
        self.ridge_epsilon = ridge_epsilon

    def fit(self, X, y):
        X, y = check_X_y(X, y, y_numeric=True, dtype=np.float64)
        self.model_ = fit_linear(X, y, self.ridge_epsilon)
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self, "model_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(
                f"expected {self.n_features_in_} features, got {X.shape[1]}"
            )
        return self.model_.predict(X)
