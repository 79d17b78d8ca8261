"""Log-log least squares for the scaling exponent in ε(δ) ≍ δ^a."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted


@dataclass
class FitResult:
    slope: float
    intercept: float
    r2: float
    points: list


def fit_scaling_exponent(rows) -> FitResult:
    """Unweighted OLS of log ε on log δ over rows with δ > 0 and ε > 0."""
    arr = np.asarray([(float(d), float(e)) for d, e in rows], dtype=np.float64).reshape(-1, 2)
    keep = (arr[:, 0] > 0) & (arr[:, 1] > 0) & np.all(np.isfinite(arr), axis=1)
    arr = arr[keep]
    if arr.shape[0] < 3:
        raise ValueError(f"need at least 3 rows with positive δ and ε, got {arr.shape[0]}")
    lx, ly = np.log(arr[:, 0]), np.log(arr[:, 1])
    if np.ptp(lx) == 0:
        raise ValueError("all δ values are equal")
    fit = stats.linregress(lx, ly)
    return FitResult(float(fit.slope), float(fit.intercept), float(fit.rvalue**2),
                     list(zip(lx.tolist(), ly.tolist())))


class ScalingExponentRegressor(RegressorMixin, BaseEstimator):
    """Estimator form of :func:`fit_scaling_exponent`.

    ``X`` is a column of δ values and ``y`` the matching ε values;
    ``predict`` returns exp(intercept) δ^slope.
    """

    def fit(self, X, y):
        X = check_array(X, ensure_min_samples=3)
        if X.shape[1] != 1:
            raise ValueError("X must have a single column of δ values")
        y = np.asarray(y, dtype=np.float64).reshape(-1)
        if y.size != X.shape[0]:
            raise ValueError("X and y lengths differ")
        res = fit_scaling_exponent(zip(X[:, 0], y))
        self.slope_ = res.slope
        self.intercept_ = res.intercept
        self.r2_ = res.r2
        self.n_features_in_ = 1
        return self

    def predict(self, X):
        check_is_fitted(self, "slope_")
        X = check_array(X)
        return np.exp(self.intercept_) * X[:, 0] ** self.slope_
