"""Weighted conformal prediction comparator.

For a query point x the calibration residuals get weights proportional to
the estimated propensity odds at their covariates, the query contributes a
point mass at +infinity proportional to its own odds, and the interval is
mu_hat(x) plus/minus the (1 - alpha) quantile of that weighted mixture.
Whenever the query's mass exceeds alpha the quantile, and so the width, is
infinite; truncation at W_max happens only in benchmark reporting.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import data as data_mod
from .data import Dataset, as_generator
from .ifcore import ContractViolation
from .nuisance import PropensityModel, fit_propensity
from .scores import Interval, RidgeModel, fit_ridge


def weighted_quantile(values, weights, q: float) -> float:
    """Smallest v with cumulative normalized weight of {values <= v} >= q.

    Values may include +inf; the result is +inf when the finite mass below
    the level q runs out.
    """
    values = np.asarray(values, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    if values.size == 0:
        raise ContractViolation("weighted quantile of an empty distribution")
    if np.any(weights <= 0):
        raise ValueError("weights must be positive")
    order = np.argsort(values)
    cum = np.cumsum(weights[order])
    target = q * cum[-1]
    idx = int(np.searchsorted(cum, target, side="left"))
    if idx >= values.size:
        idx = values.size - 1
    return float(values[order][idx])


@dataclass(frozen=True)
class WcpModel:
    mu: RidgeModel
    propensity: PropensityModel
    cal_x: np.ndarray
    cal_scores: np.ndarray
    alpha: float
    w_max: float

    def _calib(self):
        w = self.propensity.odds(self.cal_x)
        order = np.argsort(self.cal_scores)
        return self.cal_scores[order], np.cumsum(w[order])


def fit_wcp(
    ds: Dataset,
    rng,
    w_max: float,
    alpha: float = 0.1,
    ridge_lambda: float = 1.0,
    clip: float = 0.99,
) -> WcpModel:
    """Halve the data; mu_hat and the propensity on part 1, residuals on part 2."""
    plan = data_mod.split(ds, (0.5, 0.5), as_generator(rng))
    tr, cal = plan.parts
    tr_lab = tr[ds.t[tr] == 0]
    if tr_lab.size == 0:
        raise ContractViolation("WCP training part has no labeled units")
    mu = fit_ridge(ds.x[tr_lab], ds.y[tr_lab], ridge_lambda)
    prop = fit_propensity(ds.x[tr], ds.t[tr], clip=clip)
    cal_lab = cal[ds.t[cal] == 0]
    if cal_lab.size == 0:
        raise ContractViolation("WCP calibration part has no labeled units")
    scores = np.abs(ds.y[cal_lab] - mu.predict(ds.x[cal_lab]))
    return WcpModel(mu, prop, ds.x[cal_lab], scores, alpha, float(w_max))


def wcp_quantile(model: WcpModel, x: np.ndarray) -> float:
    scores = np.concatenate([model.cal_scores, [np.inf]])
    w_test = float(model.propensity.odds(np.atleast_2d(x))[0])
    weights = np.concatenate([model.propensity.odds(model.cal_x), [w_test]])
    return weighted_quantile(scores, weights, 1.0 - model.alpha)


def wcp_predict(model: WcpModel, x: np.ndarray) -> Interval:
    """Interval mu_hat(x) +/- the recalculated weighted quantile (untruncated)."""
    lo, up = wcp_predict_bounds(model, np.atleast_2d(x))
    return Interval(float(lo[0]), float(up[0]))


def wcp_predict_bounds(model: WcpModel, X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized prediction: only the query's own mass varies per point."""
    X = np.atleast_2d(X)
    scores_sorted, cum = model._calib()
    w_test = model.propensity.odds(X)
    target = (1.0 - model.alpha) * (cum[-1] + w_test)
    idx = np.searchsorted(cum, target, side="left")
    q = np.where(idx >= scores_sorted.size, np.inf, scores_sorted[np.minimum(idx, scores_sorted.size - 1)])
    mu = model.mu.predict(X)
    return mu - q, mu + q
