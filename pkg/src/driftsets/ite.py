"""Individual-treatment-effect intervals via the covariate-shift reduction.

Under unconfoundedness, predicting the missing potential outcome of one arm
from the other arm's labeled data is exactly the covariate-shift problem:
relabel the source arm as labeled, the other arm as target, and run the
split doubly robust procedure.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Dataset
from .drp import ConfigurationError, DrpConfig, FittedDrp, fit_split3, predict
from .scores import Interval


@dataclass(frozen=True)
class CausalUnit:
    x: np.ndarray
    a: int
    y_obs: float


def causal_dataset(X: np.ndarray, a: np.ndarray, y_obs: np.ndarray, source_arm: int) -> Dataset:
    """Relabel: the source arm is labeled (t=0), the other arm is the target."""
    t = (np.asarray(a) != source_arm).astype(np.int64)
    y = np.where(t == 1, np.nan, np.asarray(y_obs, dtype=np.float64))
    return Dataset(np.asarray(X, dtype=np.float64), t, y)


def fit_counterfactual(
    X: np.ndarray, a: np.ndarray, y_obs: np.ndarray, source_arm: int, cfg: DrpConfig, rng
) -> FittedDrp:
    """Prediction sets for Y(source_arm) with coverage over the other arm."""
    a = np.asarray(a)
    if not (np.any(a == 0) and np.any(a == 1)):
        raise ConfigurationError("both treatment arms must be present")
    ds = causal_dataset(X, a, y_obs, source_arm)
    return fit_split3(ds, cfg, rng)


def ite_interval_insample(fitted_c0: FittedDrp, fitted_c1: FittedDrp, unit: CausalUnit) -> Interval:
    """ITE interval for a study subject, using their observed outcome.

    Treated: y_obs - C0(x) with endpoints flipped; control: C1(x) - y_obs.
    """
    if unit.a == 1:
        c0 = predict(fitted_c0, unit.x)
        return Interval(unit.y_obs - c0.upper, unit.y_obs - c0.lower)
    c1 = predict(fitted_c1, unit.x)
    return Interval(c1.lower - unit.y_obs, c1.upper - unit.y_obs)


def ite_interval_future(fitted_c0: FittedDrp, fitted_c1: FittedDrp, x: np.ndarray) -> Interval:
    """ITE interval for a subject with no observed outcome.

    Both constituent sets must be fit at level 1 - alpha/2; the difference
    set [L1 - U0, U1 - L0] then covers Y(1) - Y(0) at 1 - alpha by the
    union bound.
    """
    c1 = predict(fitted_c1, x)
    c0 = predict(fitted_c0, x)
    return Interval(c1.lower - c0.upper, c1.upper - c0.lower)
