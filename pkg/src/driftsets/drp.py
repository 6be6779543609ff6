"""The three doubly robust prediction procedures and the set constructor.

All variants share the same skeleton: train a score model, fit (or accept
oracle) nuisances, then solve the quantile estimating equation on an
evaluation set. The variants differ only in which data each stage sees:

  split3  score on part 1, nuisances on part 2, equation on part 3
  split2  score and nuisances on part 1, equation on part 2
  full    everything on the full data (no splitting, deterministic)

fit_efcp trains several candidate scores on the first half with shared
nuisances, solves one threshold per candidate on the second half, and
per query point returns the narrowest candidate set.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence, Union

import numpy as np

from . import data as data_mod
from .data import Dataset, SplitPlan, as_generator
from .ifcore import QuantileSolution, solve_quantile
from .nuisance import CondCdfModel, OraclePair, PropensityModel, fit_cond_cdf, fit_propensity
from .scores import Interval, ScoreModel, fit_score_model


class ConfigurationError(ValueError):
    """The data cannot support the requested fit (e.g. a part lacks labels)."""


@dataclass(frozen=True)
class ScoreSpec:
    kind: str = "absolute-residual"  # or "cqr"
    ridge_lambda: float = 1.0
    cqr_levels: Optional[tuple] = None  # defaults to (alpha/2, 1 - alpha/2)
    fixed: Optional[ScoreModel] = None  # skip training, use this model as-is


NuisanceSpec = Union[str, OraclePair, Callable[[ScoreModel], OraclePair]]


@dataclass(frozen=True)
class DrpConfig:
    alpha: float = 0.1
    variant: str = "split3"  # split2 | split3 | full
    score: ScoreSpec = field(default_factory=ScoreSpec)
    nuisance: NuisanceSpec = "fitted"
    fractions: Optional[tuple] = None
    clip: float = 0.99
    grid_size: int = 50

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie in (0, 1)")
        if self.variant not in ("split2", "split3", "full"):
            raise ValueError(f"unknown variant {self.variant!r}")


@dataclass(frozen=True)
class Nuisances:
    pi_fn: Callable[[np.ndarray], np.ndarray]
    m: object  # CondCdfModel or a callable (theta, X) -> values
    grid: Optional[np.ndarray]
    propensity: Optional[PropensityModel] = None
    cond_cdf: Optional[CondCdfModel] = None


@dataclass(frozen=True)
class FittedDrp:
    score_model: ScoreModel
    nuisances: Nuisances
    solution: QuantileSolution
    alpha: float
    plan: Optional[SplitPlan] = None


def _fit_score(ds: Dataset, idx: np.ndarray, cfg: DrpConfig) -> ScoreModel:
    spec = cfg.score
    if spec.fixed is not None:
        return spec.fixed
    lab = idx[ds.t[idx] == 0]
    if lab.size == 0:
        raise ConfigurationError("score-training part has no labeled units")
    levels = spec.cqr_levels if spec.cqr_levels is not None else (cfg.alpha / 2, 1 - cfg.alpha / 2)
    return fit_score_model(
        ds.x[lab], ds.y[lab], kind=spec.kind, ridge_lambda=spec.ridge_lambda, cqr_levels=levels
    )


def _fit_nuisances(ds: Dataset, idx: np.ndarray, cfg: DrpConfig, score_model: ScoreModel) -> Nuisances:
    spec = cfg.nuisance
    if callable(spec) and not isinstance(spec, str):
        spec = spec(score_model)
    if isinstance(spec, OraclePair):
        return Nuisances(pi_fn=spec.pi, m=spec.m, grid=spec.grid)
    if spec != "fitted":
        raise ValueError(f"unknown nuisance spec {spec!r}")
    prop = fit_propensity(ds.x[idx], ds.t[idx], clip=cfg.clip)
    lab = idx[ds.t[idx] == 0]
    if lab.size == 0:
        raise ConfigurationError("nuisance-training part has no labeled units")
    scores = score_model.score(ds.x[lab], ds.y[lab])
    cdf = fit_cond_cdf(ds.x[lab], scores, grid_size=cfg.grid_size)
    return Nuisances(pi_fn=prop.odds, m=cdf, grid=cdf.grid, propensity=prop, cond_cdf=cdf)


def _solve_on(ds: Dataset, idx: np.ndarray, cfg: DrpConfig, score_model: ScoreModel, nu: Nuisances) -> QuantileSolution:
    x = ds.x[idx]
    t = ds.t[idx]
    r = np.full(idx.size, np.nan)
    lab = t == 0
    r[lab] = score_model.score(x[lab], ds.y[idx][lab])
    return solve_quantile(x, r, t, nu.pi_fn, nu.m, cfg.alpha, extra_candidates=nu.grid)


def fit_split3(ds: Dataset, cfg: DrpConfig, rng) -> FittedDrp:
    """Three-way split: score, nuisances and estimating equation see disjoint parts."""
    fractions = cfg.fractions or (1 / 3, 1 / 3, 1 / 3)
    if len(fractions) != 3:
        raise ConfigurationError("split3 needs three fractions")
    plan = data_mod.split(ds, fractions, as_generator(rng))
    a, b, c = plan.parts
    score_model = _fit_score(ds, a, cfg)
    nu = _fit_nuisances(ds, b, cfg, score_model)
    solution = _solve_on(ds, c, cfg, score_model, nu)
    return FittedDrp(score_model, nu, solution, cfg.alpha, plan)


def fit_split2(ds: Dataset, cfg: DrpConfig, rng) -> FittedDrp:
    """Two-way split: score and nuisances on part 1, equation on part 2."""
    fractions = cfg.fractions or (1 / 2, 1 / 2)
    if len(fractions) != 2:
        raise ConfigurationError("split2 needs two fractions")
    plan = data_mod.split(ds, fractions, as_generator(rng))
    a, b = plan.parts
    score_model = _fit_score(ds, a, cfg)
    nu = _fit_nuisances(ds, a, cfg, score_model)
    solution = _solve_on(ds, b, cfg, score_model, nu)
    return FittedDrp(score_model, nu, solution, cfg.alpha, plan)


def fit_full(ds: Dataset, cfg: DrpConfig) -> FittedDrp:
    """No splitting: score, nuisances and equation all see the full data."""
    idx = np.arange(ds.n)
    score_model = _fit_score(ds, idx, cfg)
    nu = _fit_nuisances(ds, idx, cfg, score_model)
    solution = _solve_on(ds, idx, cfg, score_model, nu)
    return FittedDrp(score_model, nu, solution, cfg.alpha, None)


def fit(ds: Dataset, cfg: DrpConfig, rng=None) -> FittedDrp:
    if cfg.variant == "full":
        return fit_full(ds, cfg)
    if cfg.variant == "split2":
        return fit_split2(ds, cfg, rng)
    return fit_split3(ds, cfg, rng)


def predict(fitted: FittedDrp, x: np.ndarray) -> Interval:
    """Prediction set at the solved threshold; +inf gives the whole line."""
    return fitted.score_model.interval(x, fitted.solution.theta)


def predict_bounds(fitted: FittedDrp, X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    return fitted.score_model.interval_bounds(X, fitted.solution.theta)


@dataclass(frozen=True)
class EfcpSelector:
    """Per-query minimal-width selection among candidate DRP fits."""

    candidates: tuple
    alpha: float
    plan: SplitPlan

    def candidate_bounds(self, X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """(K, n) lower and upper interval ends for every candidate."""
        lows, ups = [], []
        for f in self.candidates:
            lo, up = predict_bounds(f, X)
            lows.append(lo)
            ups.append(up)
        return np.array(lows), np.array(ups)

    def predict_bounds(self, X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        lo, up = self.candidate_bounds(X)
        widths = np.maximum(up - lo, 0.0)
        widths[up < lo] = 0.0
        best = np.argmin(widths, axis=0)  # argmin takes the smallest index on ties
        cols = np.arange(X.shape[0] if X.ndim == 2 else 1)
        return lo[best, cols], up[best, cols]

    def predict(self, x: np.ndarray) -> Interval:
        lo, up = self.predict_bounds(np.atleast_2d(x))
        return Interval(float(lo[0]), float(up[0]))


def fit_efcp(ds: Dataset, score_specs: Sequence[ScoreSpec], cfg: DrpConfig, rng) -> EfcpSelector:
    """Candidate scores on the first half, shared nuisances, one solve each.

    The nuisances are fit once on part 1 (the conditional CDF on the first
    candidate's scores); double robustness through the propensity keeps the
    coverage of every candidate honest even though m is shared.
    """
    if len(score_specs) < 1:
        raise ConfigurationError("EFCP needs at least one score candidate")
    fractions = cfg.fractions or (1 / 2, 1 / 2)
    plan = data_mod.split(ds, fractions, as_generator(rng))
    a, b = plan.parts
    models = [_fit_score(ds, a, replace(cfg, score=spec)) for spec in score_specs]
    nu = _fit_nuisances(ds, a, cfg, models[0])
    fits = []
    for spec, model in zip(score_specs, models):
        solution = _solve_on(ds, b, replace(cfg, score=spec), model, nu)
        fits.append(FittedDrp(model, nu, solution, cfg.alpha, plan))
    return EfcpSelector(tuple(fits), cfg.alpha, plan)
