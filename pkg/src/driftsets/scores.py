"""Conformal score functions and their inverse set maps.

Each score R(x, y) comes with the interval constructor for its sub-level
set {y : R(x, y) <= theta}; membership in the interval is equivalent to the
score being at most theta, including the empty and whole-line edge cases.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ._kernels import pinball_solve


class NumericError(RuntimeError):
    """A numeric routine failed to converge or hit a singular system."""


@dataclass(frozen=True)
class Interval:
    """Closed interval; lower > upper encodes the empty set."""

    lower: float
    upper: float

    @property
    def is_empty(self) -> bool:
        return not self.lower <= self.upper

    @property
    def width(self) -> float:
        if self.is_empty:
            return 0.0
        return self.upper - self.lower

    def contains(self, y: float) -> bool:
        return self.lower <= y <= self.upper


@dataclass(frozen=True)
class RidgeModel:
    coef: np.ndarray
    intercept: float
    lam: float

    def predict(self, X: np.ndarray) -> np.ndarray:
        return np.atleast_2d(X) @ self.coef + self.intercept


@dataclass(frozen=True)
class QuantileModel:
    tau: float
    coef: np.ndarray
    intercept: float

    def predict(self, X: np.ndarray) -> np.ndarray:
        return np.atleast_2d(X) @ self.coef + self.intercept


def fit_ridge(X: np.ndarray, y: np.ndarray, lam: float = 1.0) -> RidgeModel:
    """Ridge regression by a direct solve of the normal equations.

    The penalty applies to the coefficients only, never the intercept.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n, d = X.shape
    if lam < 0:
        raise ValueError("ridge penalty must be nonnegative")
    if lam == 0 and n < d + 1:
        raise NumericError("need at least d+1 points for an unpenalized fit; set lam > 0")
    A = np.concatenate([X, np.ones((n, 1))], axis=1)
    G = A.T @ A
    G[:d, :d] += lam * np.eye(d)
    rhs = A.T @ y
    try:
        sol = np.linalg.solve(G, rhs)
    except np.linalg.LinAlgError:
        raise NumericError("singular normal equations; set lam > 0") from None
    if np.linalg.cond(G) > 1e12 and lam == 0:
        raise NumericError("near-singular normal equations; set lam > 0")
    return RidgeModel(coef=sol[:d], intercept=float(sol[d]), lam=float(lam))


def ridge_score(model: RidgeModel, x: np.ndarray, y) -> np.ndarray:
    """Absolute residual |y - mu_hat(x)|."""
    return np.abs(np.asarray(y, dtype=np.float64) - model.predict(x))


def ridge_interval(model: RidgeModel, x: np.ndarray, theta: float) -> Interval:
    mu = float(model.predict(np.atleast_2d(x))[0])
    return Interval(mu - theta, mu + theta)


def fit_quantile(
    X: np.ndarray,
    y: np.ndarray,
    tau: float,
    subgrad_iters: int = 200,
    max_rounds: int = 8,
    rel_tol: float = 1e-8,
) -> QuantileModel:
    """Linear quantile regression minimizing the average pinball loss.

    A subgradient-plus-IRLS kernel gets close; alternating it with an exact
    vertex polish converges, declared when the objective improves by less
    than rel_tol relatively between rounds.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n, d = X.shape
    if not 0.0 < tau < 1.0:
        raise ValueError("quantile level must lie in (0, 1)")
    if n < d + 2:
        raise ValueError(f"need at least d+2 = {d + 2} points to fit a quantile model")
    A = np.concatenate([X, np.ones((n, 1))], axis=1)
    w0 = np.linalg.lstsq(A, y, rcond=None)[0]
    step_scale = max(float(np.std(y)), 1e-8) * 0.1

    w, iters = pinball_solve(A, y, float(tau), w0, subgrad_iters, step_scale, 0.1, 12)
    prev = pinball_loss(X, y, tau, w[:d], float(w[d]))
    converged = False
    for _round in range(max_rounds):
        w = _vertex_polish(A, y, tau, w)
        ob = pinball_loss(X, y, tau, w[:d], float(w[d]))
        if prev - ob <= rel_tol * max(1.0, abs(prev)):
            converged = True
            break
        prev = ob
        w, extra = pinball_solve(A, y, float(tau), w, 0, step_scale, 1e-4, 8)
        iters += extra
    if not converged:
        raise NumericError(f"pinball solver did not converge after {iters} iterations")
    return QuantileModel(tau=float(tau), coef=w[:d], intercept=float(w[d]))


def _vertex_polish(A: np.ndarray, y: np.ndarray, tau: float, w: np.ndarray) -> np.ndarray:
    """Snap to the best exact vertex near the iterative solution.

    A pinball minimizer interpolates d+1 points; try the interpolants of
    small-residual subsets and keep whichever beats the iterate.
    """
    from itertools import combinations

    n, p = A.shape
    if n < p:
        return w

    def obj(wc):
        u = y - A @ wc
        return float(np.mean(u * (tau - (u < 0))))

    best_obj = obj(w)
    best_w = w
    pool = np.argsort(np.abs(y - A @ w))[: min(2 * p, n)]
    tried = 0
    for subset in combinations(pool.tolist(), p):
        tried += 1
        if tried > 1000:
            break
        sub = np.array(subset)
        try:
            w_s = np.linalg.solve(A[sub], y[sub])
        except np.linalg.LinAlgError:
            continue
        ob = obj(w_s)
        if ob < best_obj:
            best_obj = ob
            best_w = w_s
    return best_w


def pinball_loss(X: np.ndarray, y: np.ndarray, tau: float, coef: np.ndarray, intercept: float) -> float:
    u = np.asarray(y, dtype=np.float64) - (np.atleast_2d(X) @ coef + intercept)
    return float(np.mean(u * (tau - (u < 0))))


def cqr_score(lo: QuantileModel, hi: QuantileModel, x: np.ndarray, y) -> np.ndarray:
    """CQR score max{q_lo(x) - y, y - q_hi(x)}; may be negative."""
    y = np.asarray(y, dtype=np.float64)
    return np.maximum(lo.predict(x) - y, y - hi.predict(x))


def cqr_interval(lo: QuantileModel, hi: QuantileModel, x: np.ndarray, theta: float) -> Interval:
    x2 = np.atleast_2d(x)
    return Interval(float(lo.predict(x2)[0]) - theta, float(hi.predict(x2)[0]) + theta)


@dataclass(frozen=True)
class ScoreModel:
    """A fitted score paired with its inverse set map.

    kind is "absolute-residual" (backed by a ridge fit) or "cqr" (backed by
    a pair of quantile fits).
    """

    kind: str
    ridge: Optional[RidgeModel] = None
    q_lo: Optional[QuantileModel] = None
    q_hi: Optional[QuantileModel] = None

    def score(self, X: np.ndarray, y) -> np.ndarray:
        if self.kind == "absolute-residual":
            return ridge_score(self.ridge, X, y)
        return cqr_score(self.q_lo, self.q_hi, X, y)

    def interval(self, x: np.ndarray, theta: float) -> Interval:
        if self.kind == "absolute-residual":
            return ridge_interval(self.ridge, x, theta)
        return cqr_interval(self.q_lo, self.q_hi, x, theta)

    def interval_bounds(self, X: np.ndarray, theta: float) -> tuple[np.ndarray, np.ndarray]:
        """Vectorized (lower, upper) interval ends over rows of X."""
        X = np.atleast_2d(X)
        if self.kind == "absolute-residual":
            mu = self.ridge.predict(X)
            return mu - theta, mu + theta
        return self.q_lo.predict(X) - theta, self.q_hi.predict(X) + theta


def fit_score_model(
    X: np.ndarray,
    y: np.ndarray,
    kind: str = "absolute-residual",
    ridge_lambda: float = 1.0,
    cqr_levels: Optional[tuple[float, float]] = None,
) -> ScoreModel:
    if kind == "absolute-residual":
        return ScoreModel(kind=kind, ridge=fit_ridge(X, y, ridge_lambda))
    if kind == "cqr":
        lo_level, hi_level = cqr_levels if cqr_levels is not None else (0.05, 0.95)
        return ScoreModel(
            kind=kind,
            q_lo=fit_quantile(X, y, lo_level),
            q_hi=fit_quantile(X, y, hi_level),
        )
    raise ValueError(f"unknown score kind {kind!r}")
