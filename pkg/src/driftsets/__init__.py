"""Doubly robust prediction sets under explainable covariate shift."""

from .baselines import WcpModel, fit_wcp, wcp_predict, weighted_quantile
from .data import Dataset, SplitPlan, Unit, apply_missingness, load_airfoil, load_csv, split
from .drp import (
    DrpConfig,
    EfcpSelector,
    FittedDrp,
    ScoreSpec,
    fit_efcp,
    fit_full,
    fit_split2,
    fit_split3,
    predict,
)
from .ifcore import QuantileSolution, empirical_if_mean, if_value, solve_quantile, solve_quantile_sens
from .ite import CausalUnit, fit_counterfactual, ite_interval_future, ite_interval_insample
from .nuisance import CondCdfModel, OraclePair, PropensityModel, fit_cond_cdf, fit_propensity, monotone_rearrange
from .scores import Interval, RidgeModel, QuantileModel, ScoreModel, fit_quantile, fit_ridge

__version__ = "0.1.0"

__all__ = [
    "Dataset",
    "Unit",
    "SplitPlan",
    "load_csv",
    "load_airfoil",
    "apply_missingness",
    "split",
    "Interval",
    "RidgeModel",
    "QuantileModel",
    "ScoreModel",
    "fit_ridge",
    "fit_quantile",
    "PropensityModel",
    "CondCdfModel",
    "OraclePair",
    "fit_propensity",
    "fit_cond_cdf",
    "monotone_rearrange",
    "QuantileSolution",
    "if_value",
    "empirical_if_mean",
    "solve_quantile",
    "solve_quantile_sens",
    "DrpConfig",
    "ScoreSpec",
    "FittedDrp",
    "EfcpSelector",
    "fit_split2",
    "fit_split3",
    "fit_full",
    "fit_efcp",
    "predict",
    "WcpModel",
    "weighted_quantile",
    "fit_wcp",
    "wcp_predict",
    "CausalUnit",
    "fit_counterfactual",
    "ite_interval_insample",
    "ite_interval_future",
    "__version__",
]
