"""Influence-function evaluation and the quantile estimating equation.

The estimating function is

    1{t=0} * pi(x) * [1{r <= theta} - m(theta, x)] + 1{t=1} * [m(theta, x) - (1 - alpha)]

and the quantile estimate is the smallest candidate theta whose empirical
mean over the evaluation set is nonnegative. Candidates are the distinct
labeled scores plus the thresholds where m changes, plus +inf; the mean is
piecewise constant between them, so the scan is lossless.

The sensitivity variant replaces the labeled weight pi(x) with
exp(-eta(x) - gamma(x, y)) to encode departures from explainable shift.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np


class ContractViolation(ValueError):
    """An operation was called outside its stated preconditions."""


@dataclass(frozen=True)
class QuantileSolution:
    """Solved threshold (possibly +inf) and the empirical IF mean there."""

    theta: float
    if_mean: float


def _m_values(m, theta: float, X: np.ndarray) -> np.ndarray:
    vals = m.m_hat(theta, X) if hasattr(m, "m_hat") else m(theta, X)
    return np.broadcast_to(np.asarray(vals, dtype=np.float64), (X.shape[0],))


def _mean_from_mvals(theta, r, labeled, w_lab, m_vals, alpha) -> float:
    ind = (r[labeled] <= theta).astype(np.float64)
    s0 = np.sum(w_lab * (ind - m_vals[labeled]))
    s1 = np.sum(m_vals[~labeled] - (1.0 - alpha))
    return float((s0 + s1) / len(r))


def if_value(theta, x, r, t, pi, m, alpha) -> float:
    """Influence-function value for a single unit."""
    x2 = np.atleast_2d(np.asarray(x, dtype=np.float64))
    m_val = float(_m_values(m, theta, x2)[0])
    if t == 0:
        if r is None or (isinstance(r, float) and math.isnan(r)):
            raise ContractViolation("labeled unit (t=0) must carry a score")
        pi_val = float(np.asarray(pi(x2)).reshape(-1)[0])
        return pi_val * (float(r <= theta) - m_val)
    return m_val - (1.0 - alpha)


def _check_eval_set(x, r, t):
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    t = np.asarray(t, dtype=np.int64)
    r = np.asarray(r, dtype=np.float64)
    if x.shape[0] == 0:
        raise ContractViolation("evaluation set is empty")
    labeled = t == 0
    if np.any(~np.isfinite(r[labeled])):
        raise ContractViolation("every labeled unit in the evaluation set needs a score")
    return x, r, t, labeled


def empirical_if_mean(theta, x, r, t, pi, m, alpha) -> float:
    """Arithmetic mean of the influence function over the evaluation set."""
    x, r, t, labeled = _check_eval_set(x, r, t)
    w_lab = np.asarray(pi(x[labeled]), dtype=np.float64)
    return _mean_from_mvals(theta, r, labeled, w_lab, _m_values(m, theta, x), alpha)


def _candidates(r_lab: np.ndarray, extra) -> np.ndarray:
    cands = [r_lab]
    if extra is not None:
        extra = np.asarray(extra, dtype=np.float64)
        cands.append(extra[np.isfinite(extra)])
    return np.unique(np.concatenate(cands)) if cands else np.array([])


def _solve_weighted(x, r, t, labeled, w_lab, m, alpha, extra_candidates) -> QuantileSolution:
    cands = _candidates(r[labeled], extra_candidates)
    if hasattr(m, "values_at") and len(cands):
        # step-structured m: one expensive pass, then column lookups that
        # reproduce m_hat's output bit for bit
        vals = m.values_at(x)
        idx = np.searchsorted(m.grid, cands, side="right") - 1
        zeros = np.zeros(x.shape[0])
        for c, theta in enumerate(cands):
            m_vals = zeros if idx[c] < 0 else vals[:, min(idx[c], len(m.grid) - 1)]
            mean = _mean_from_mvals(theta, r, labeled, w_lab, m_vals, alpha)
            if mean >= 0.0:
                return QuantileSolution(float(theta), mean)
    else:
        for theta in cands:
            mean = _mean_from_mvals(theta, r, labeled, w_lab, _m_values(m, theta, x), alpha)
            if mean >= 0.0:
                return QuantileSolution(float(theta), mean)
    mean_inf = _mean_from_mvals(np.inf, r, labeled, w_lab, _m_values(m, np.inf, x), alpha)
    return QuantileSolution(math.inf, mean_inf)


def solve_quantile(x, r, t, pi, m, alpha, extra_candidates=None) -> QuantileSolution:
    """Smallest candidate theta with nonnegative empirical IF mean.

    extra_candidates should carry the thresholds of a fitted conditional-CDF
    model (its grid); +inf is always the fallback when no finite candidate
    qualifies.
    """
    x, r, t, labeled = _check_eval_set(x, r, t)
    w_lab = np.asarray(pi(x[labeled]), dtype=np.float64)
    return _solve_weighted(x, r, t, labeled, w_lab, m, alpha, extra_candidates)


def sens_if_value(theta, x, y, r, t, eta, m, gamma, alpha) -> float:
    """Sensitivity-analysis influence function for a single unit."""
    x2 = np.atleast_2d(np.asarray(x, dtype=np.float64))
    m_val = float(_m_values(m, theta, x2)[0])
    if t == 0:
        missing = (r is None or (isinstance(r, float) and math.isnan(r))) or (
            y is None or (isinstance(y, float) and math.isnan(y))
        )
        if missing:
            raise ContractViolation("labeled unit (t=0) must carry outcome and score")
        y1 = np.asarray([y], dtype=np.float64)
        w = float(_sens_weights(eta, gamma, x2, y1)[0])
        return w * (float(r <= theta) - m_val)
    return m_val - (1.0 - alpha)


def _sens_weights(eta, gamma, X_lab, y_lab) -> np.ndarray:
    eta_vals = np.asarray(eta(X_lab), dtype=np.float64)
    gamma_vals = np.asarray(gamma(X_lab, y_lab), dtype=np.float64)
    return np.exp(-(eta_vals + gamma_vals))


def empirical_sens_if_mean(theta, x, y, r, t, eta, m, gamma, alpha) -> float:
    x, r, t, labeled = _check_eval_set(x, r, t)
    y = np.asarray(y, dtype=np.float64)
    if np.any(~np.isfinite(y[labeled])):
        raise ContractViolation("every labeled unit needs an outcome")
    w_lab = _sens_weights(eta, gamma, x[labeled], y[labeled])
    return _mean_from_mvals(theta, r, labeled, w_lab, _m_values(m, theta, x), alpha)


def solve_quantile_sens(x, y, r, t, eta, m, gamma, alpha, extra_candidates=None) -> QuantileSolution:
    """Quantile solve with the sensitivity weights exp(-eta(x) - gamma(x, y))."""
    x, r, t, labeled = _check_eval_set(x, r, t)
    y = np.asarray(y, dtype=np.float64)
    if np.any(~np.isfinite(y[labeled])):
        raise ContractViolation("every labeled unit needs an outcome")
    w_lab = _sens_weights(eta, gamma, x[labeled], y[labeled])
    return _solve_weighted(x, r, t, labeled, w_lab, m, alpha, extra_candidates)
