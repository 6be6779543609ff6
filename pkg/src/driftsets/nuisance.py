"""Nuisance estimators: the propensity odds and the conditional score CDF.

Both are plain logistic GLMs. The conditional CDF is fit on a grid of score
thresholds and monotonized pointwise in the threshold by rearrangement,
which never increases the L2 distance to any monotone target.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from ._kernels import logistic_irls
from .scores import NumericError


def expit(z):
    return 1.0 / (1.0 + np.exp(-np.clip(z, -500, 500)))


def _fit_logistic(X: np.ndarray, target: np.ndarray, warn_label: str):
    n, d = X.shape
    A = np.concatenate([X, np.ones((n, 1))], axis=1)
    w, _iters, converged, diverged = logistic_irls(A, target.astype(np.float64), 100, 1e-8)
    if diverged:
        warnings.warn(
            f"{warn_label}: coefficients diverging (perfect separation?); "
            "returning the clipped model",
            stacklevel=3,
        )
    elif not converged:
        raise NumericError(f"{warn_label}: IRLS did not converge in 100 iterations")
    return w[:d], float(w[d])


@dataclass(frozen=True)
class PropensityModel:
    """Clipped logistic model of P(T=1 | x); pi_hat is the resulting odds."""

    coef: np.ndarray
    intercept: float
    clip: float = 0.99

    def prob(self, X: np.ndarray) -> np.ndarray:
        p = expit(np.atleast_2d(X) @ self.coef + self.intercept)
        return np.clip(p, 1.0 - self.clip, self.clip)

    def odds(self, X: np.ndarray) -> np.ndarray:
        p = self.prob(X)
        return p / (1.0 - p)


def fit_propensity(X: np.ndarray, t: np.ndarray, clip: float = 0.99) -> PropensityModel:
    """Logistic regression of T on X, probabilities clipped to [1-clip, clip]."""
    X = np.asarray(X, dtype=np.float64)
    t = np.asarray(t)
    if not 0.5 < clip < 1.0:
        raise ValueError("clip level must lie in (0.5, 1)")
    if not (np.any(t == 0) and np.any(t == 1)):
        raise ValueError("propensity fit needs both t classes present")
    coef, intercept = _fit_logistic(X, t, "propensity fit")
    return PropensityModel(coef=coef, intercept=intercept, clip=clip)


def pi_hat(model: PropensityModel, x: np.ndarray) -> np.ndarray:
    return model.odds(x)


@dataclass(frozen=True)
class CondCdfModel:
    """Per-threshold logistic fits of 1{R <= theta_k} on x, monotonized.

    Queries are a right-continuous step function of theta: 0 below the first
    threshold, flat at the last fitted value above the top one.
    """

    grid: np.ndarray
    coefs: np.ndarray       # (K, d)
    intercepts: np.ndarray  # (K,)

    def values_at(self, X: np.ndarray) -> np.ndarray:
        """(n, K) fitted values per unit, sorted nondecreasing along the grid."""
        raw = expit(np.atleast_2d(X) @ self.coefs.T + self.intercepts)
        raw.sort(axis=1)
        return raw

    def m_hat(self, theta: float, X: np.ndarray) -> np.ndarray:
        vals = self.values_at(X)
        idx = int(np.searchsorted(self.grid, theta, side="right")) - 1
        if idx < 0:
            return np.zeros(vals.shape[0])
        return vals[:, min(idx, len(self.grid) - 1)]

    def m_matrix(self, thetas: np.ndarray, X: np.ndarray) -> np.ndarray:
        """(C, n) matrix of m_hat over candidate thresholds; one CDF pass."""
        vals = self.values_at(X)
        idx = np.searchsorted(self.grid, thetas, side="right") - 1
        pos = np.clip(idx, 0, len(self.grid) - 1)
        out = vals[:, pos].T.copy()
        out[idx < 0, :] = 0.0
        return out


def fit_cond_cdf(X: np.ndarray, r: np.ndarray, grid_size: int = 50) -> CondCdfModel:
    """Fit the conditional CDF of the score on an empirical-quantile grid."""
    X = np.asarray(X, dtype=np.float64)
    r = np.asarray(r, dtype=np.float64)
    if len(r) < 1:
        raise ValueError("conditional CDF fit needs labeled scores")
    if len(r) < grid_size:
        grid_size = max(1, len(r) - 1) if len(r) > 1 else 1
    levels = np.arange(1, grid_size + 1) / (grid_size + 1)
    grid = np.unique(np.quantile(r, levels))
    if grid.size == 0 or np.all(r == r[0]):
        grid = np.array([r[0]])
    coefs = np.zeros((len(grid), X.shape[1]))
    intercepts = np.zeros(len(grid))
    for k, theta in enumerate(grid):
        z = (r <= theta).astype(np.float64)
        if z.min() == z.max():
            # all one class at this threshold: constant fit at a clipped frequency
            freq = min(max(z.mean(), 1.0 / (2 * len(z))), 1.0 - 1.0 / (2 * len(z)))
            intercepts[k] = np.log(freq / (1.0 - freq))
            continue
        coefs[k], intercepts[k] = _fit_logistic(X, z, f"cond-cdf fit at threshold {k}")
    return CondCdfModel(grid=grid, coefs=coefs, intercepts=intercepts)


def m_hat(model: CondCdfModel, theta: float, x: np.ndarray) -> np.ndarray:
    return model.m_hat(theta, x)


def monotone_rearrange(values: np.ndarray) -> np.ndarray:
    """One-dimensional increasing rearrangement: the sorted multiset."""
    return np.sort(np.asarray(values))


@dataclass(frozen=True)
class OraclePair:
    """User-supplied exact nuisances for double-robustness experiments.

    pi maps an (n, d) covariate block to n positive weights; m maps
    (theta, X) to n values in [0, 1]. grid optionally names thresholds at
    which m changes, for the quantile solver's candidate set.
    """

    pi: Callable[[np.ndarray], np.ndarray]
    m: Callable[[float, np.ndarray], np.ndarray]
    grid: Optional[np.ndarray] = None
