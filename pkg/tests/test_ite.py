import math

import numpy as np
import pytest

from driftsets.data import spawn_rng
from driftsets.drp import ConfigurationError, DrpConfig, FittedDrp
from driftsets.ite import (
    CausalUnit,
    causal_dataset,
    fit_counterfactual,
    ite_interval_future,
    ite_interval_insample,
)
from driftsets.nuisance import expit
from driftsets.scores import Interval


class FakeFit:
    """Stands in for a FittedDrp with a fixed interval."""

    def __init__(self, lower, upper):
        self.interval = Interval(lower, upper)


def _patch_predict(monkeypatch, intervals):
    import driftsets.ite as ite_mod

    def fake_predict(fitted, x):
        return fitted.interval

    monkeypatch.setattr(ite_mod, "predict", fake_predict)


class TestIntervalArithmetic:
    def test_treated_unit(self, monkeypatch):
        _patch_predict(monkeypatch, None)
        c0 = FakeFit(1.0, 3.0)
        unit = CausalUnit(np.zeros(2), 1, 5.0)
        iv = ite_interval_insample(c0, None, unit)
        assert (iv.lower, iv.upper) == (2.0, 4.0)

    def test_control_unit(self, monkeypatch):
        _patch_predict(monkeypatch, None)
        c1 = FakeFit(-1.0, 1.0)
        unit = CausalUnit(np.zeros(2), 0, 0.0)
        iv = ite_interval_insample(None, c1, unit)
        assert (iv.lower, iv.upper) == (-1.0, 1.0)

    def test_future_difference(self, monkeypatch):
        _patch_predict(monkeypatch, None)
        iv = ite_interval_future(FakeFit(-1.0, 1.0), FakeFit(0.0, 2.0), np.zeros(2))
        assert (iv.lower, iv.upper) == (-1.0, 3.0)

    def test_future_width_is_sum_of_widths(self, monkeypatch):
        _patch_predict(monkeypatch, None)
        c0, c1 = FakeFit(-0.5, 2.0), FakeFit(1.0, 4.0)
        iv = ite_interval_future(c0, c1, np.zeros(2))
        assert iv.width == pytest.approx(c0.interval.width + c1.interval.width)

    def test_infinite_propagates(self, monkeypatch):
        _patch_predict(monkeypatch, None)
        iv = ite_interval_future(FakeFit(-math.inf, math.inf), FakeFit(0.0, 1.0), np.zeros(2))
        assert iv.width == math.inf


def gen_confounded(n, rng):
    X = rng.standard_normal((n, 4))
    a = (rng.random(n) < expit(0.8 * X[:, 0] - 0.5 * X[:, 1])).astype(int)
    y0 = X @ np.array([1.0, 1.0, 0.5, 0.0]) + rng.standard_normal(n)
    y1 = y0 + 2.0 + 0.5 * X[:, 0] + 0.5 * rng.standard_normal(n)
    return X, a, y0, y1, np.where(a == 1, y1, y0)


class TestCounterfactualFit:
    def test_relabeling(self):
        X = np.zeros((4, 1))
        a = np.array([0, 0, 1, 1])
        y = np.array([1.0, 2.0, 3.0, 4.0])
        ds = causal_dataset(X, a, y, source_arm=0)
        assert np.array_equal(ds.t, [0, 0, 1, 1])
        assert np.isnan(ds.y[2]) and ds.y[0] == 1.0
        ds = causal_dataset(X, a, y, source_arm=1)
        assert np.array_equal(ds.t, [1, 1, 0, 0])

    def test_needs_both_arms(self):
        X = np.zeros((4, 1))
        with pytest.raises(ConfigurationError):
            fit_counterfactual(X, np.zeros(4, dtype=int), np.ones(4), 0, DrpConfig(), 0)

    def test_deterministic(self):
        X, a, y0, y1, yobs = gen_confounded(400, spawn_rng(1))
        f1 = fit_counterfactual(X, a, yobs, 0, DrpConfig(alpha=0.1), spawn_rng(1, 1))
        f2 = fit_counterfactual(X, a, yobs, 0, DrpConfig(alpha=0.1), spawn_rng(1, 1))
        assert f1.solution.theta == f2.solution.theta

    def test_randomized_assignment_flat_propensity(self):
        rng = spawn_rng(2)
        n = 1500
        X = rng.standard_normal((n, 3))
        a = (rng.random(n) < 0.5).astype(int)
        y = X[:, 0] + rng.standard_normal(n)
        f = fit_counterfactual(X, a, y, 0, DrpConfig(alpha=0.1), spawn_rng(2, 1))
        odds = f.nuisances.pi_fn(X)
        assert np.std(odds) < 0.25
        assert abs(np.median(odds) - 1.0) < 0.3

    def test_counterfactual_coverage(self):
        # coverage of the hidden potential outcome among the other arm; the
        # band allows the O(1/sqrt(part size)) finite-sample slack
        from driftsets.drp import predict_bounds

        covs = []
        for rep in range(30):
            X, a, y0, y1, yobs = gen_confounded(1600, spawn_rng(3, rep))
            f = fit_counterfactual(X, a, yobs, 0, DrpConfig(alpha=0.1), spawn_rng(3, rep, 1))
            treated = a == 1
            lo, up = predict_bounds(f, X[treated])
            covs.append(np.mean((y0[treated] >= lo) & (y0[treated] <= up)))
        assert abs(np.mean(covs) - 0.9) < 0.025


class TestAccountingIdentity:
    def test_insample_coverage_decomposition(self):
        X, a, y0, y1, yobs = gen_confounded(600, spawn_rng(4))
        tau = y1 - y0
        c0 = fit_counterfactual(X, a, yobs, 0, DrpConfig(alpha=0.1), spawn_rng(4, 1))
        c1 = fit_counterfactual(X, a, yobs, 1, DrpConfig(alpha=0.1), spawn_rng(4, 2))
        hits = np.zeros(len(a), dtype=bool)
        for i in range(len(a)):
            iv = ite_interval_insample(c0, c1, CausalUnit(X[i], int(a[i]), float(yobs[i])))
            hits[i] = iv.lower <= tau[i] <= iv.upper
        total = hits.mean()
        p1 = (a == 1).mean()
        decomposed = p1 * hits[a == 1].mean() + (1 - p1) * hits[a == 0].mean()
        assert total == pytest.approx(decomposed, abs=1e-12)
