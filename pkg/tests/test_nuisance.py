import numpy as np
import pytest

from driftsets.nuisance import (
    CondCdfModel,
    OraclePair,
    PropensityModel,
    expit,
    fit_cond_cdf,
    fit_propensity,
    m_hat,
    monotone_rearrange,
    pi_hat,
)
from helpers import normal_cdf


class TestPropensity:
    def test_no_shift_gives_unit_odds(self):
        rng = np.random.default_rng(0)
        X = rng.standard_normal((2000, 3))
        t = (rng.random(2000) < 0.5).astype(int)
        m = fit_propensity(X, t)
        assert abs(m.intercept) < 0.15
        assert np.all(np.abs(pi_hat(m, X) - 1.0) < 0.5)

    def test_kang_schafer_coefficients_within_3_se(self):
        rng = np.random.default_rng(12)
        X = rng.standard_normal((2000, 4))
        true_coef = np.array([-1.0, 0.5, -0.25, -0.1])
        t = (rng.random(2000) < expit(X @ true_coef)).astype(int)
        m = fit_propensity(X, t)
        A = np.concatenate([X, np.ones((2000, 1))], axis=1)
        p = m.prob(X)
        info = (A * (p * (1 - p))[:, None]).T @ A
        se = np.sqrt(np.diag(np.linalg.inv(info)))[:4]
        assert np.all(np.abs(m.coef - true_coef) < 3 * se)

    def test_clip(self):
        m = PropensityModel(coef=np.array([0.0]), intercept=50.0, clip=0.99)
        x = np.array([[0.0]])
        assert m.prob(x)[0] == pytest.approx(0.99)
        assert m.odds(x)[0] == pytest.approx(99.0)

    def test_separation_warns_and_returns_clipped_model(self):
        X = np.linspace(-1, 1, 100).reshape(-1, 1)
        t = (X[:, 0] > 0).astype(int)
        with pytest.warns(UserWarning, match="separation"):
            m = fit_propensity(X, t)
        assert np.all(m.prob(X) <= 0.99) and np.all(m.prob(X) >= 0.01)

    def test_needs_both_classes(self):
        X = np.zeros((10, 1))
        with pytest.raises(ValueError):
            fit_propensity(X, np.zeros(10, dtype=int))

    def test_bounded_odds(self):
        rng = np.random.default_rng(4)
        X = rng.standard_normal((500, 2)) * 5
        t = (rng.random(500) < expit(2 * X[:, 0])).astype(int)
        m = fit_propensity(X, t, clip=0.95)
        odds = pi_hat(m, X)
        lo, hi = 0.05 / 0.95, 0.95 / 0.05
        assert np.all(odds >= lo - 1e-12) and np.all(odds <= hi + 1e-12)


class TestCondCdf:
    def test_x_free_scores_match_empirical_cdf(self):
        rng = np.random.default_rng(1)
        X = rng.standard_normal((800, 2))
        r = rng.standard_normal(800)  # independent of x
        model = fit_cond_cdf(X, r, grid_size=20)
        probes = rng.standard_normal((5, 2))
        for th in model.grid:
            emp = np.mean(r <= th)
            assert np.max(np.abs(model.m_hat(th, probes) - emp)) < 0.06

    def test_boundary_conventions(self):
        rng = np.random.default_rng(2)
        X = rng.standard_normal((100, 1))
        r = rng.standard_normal(100)
        model = fit_cond_cdf(X, r, grid_size=10)
        x = np.array([[0.3]])
        assert model.m_hat(model.grid[0] - 1.0, x)[0] == 0.0
        top = model.m_hat(model.grid[-1], x)[0]
        assert model.m_hat(model.grid[-1] + 5.0, x)[0] == top
        assert model.m_hat(np.inf, x)[0] == top

    def test_grid_levels_are_empirical_quantiles(self):
        rng = np.random.default_rng(3)
        r = rng.standard_normal(200)
        X = np.zeros((200, 1))
        model = fit_cond_cdf(X, r, grid_size=9)
        expect = np.quantile(r, np.arange(1, 10) / 10.0)
        assert np.allclose(model.grid, np.unique(expect))

    def test_linear_gaussian_matches_normal_cdf_oracle(self):
        # R | x ~ N(0.5 x, 1); the oracle CDF is a closed-form probit
        rng = np.random.default_rng(2)
        X = rng.standard_normal((500, 1))
        r = 0.5 * X[:, 0] + rng.standard_normal(500)
        model = fit_cond_cdf(X, r, grid_size=50)
        probes = np.array([[-1.0], [-0.5], [0.0], [0.5], [1.0]])
        sup = max(
            float(np.max(np.abs(m_hat(model, th, probes) - normal_cdf(th - 0.5 * probes[:, 0]))))
            for th in model.grid
        )
        assert sup < 0.1

    def test_monotone_in_theta(self):
        rng = np.random.default_rng(5)
        X = rng.standard_normal((300, 2))
        r = X[:, 0] + rng.standard_normal(300)
        model = fit_cond_cdf(X, r, grid_size=30)
        probes = rng.standard_normal((20, 2))
        vals = np.column_stack([model.m_hat(th, probes) for th in model.grid])
        assert np.all(np.diff(vals, axis=1) >= -1e-15)
        # off-grid pairs too
        for _ in range(100):
            t1, t2 = sorted(rng.normal(0, 2, size=2))
            assert np.all(model.m_hat(t1, probes) <= model.m_hat(t2, probes) + 1e-15)

    def test_values_in_unit_interval(self):
        rng = np.random.default_rng(6)
        X = rng.standard_normal((200, 1)) * 3
        r = X[:, 0] + rng.standard_normal(200)
        model = fit_cond_cdf(X, r, grid_size=25)
        probes = rng.standard_normal((50, 1)) * 4
        M = model.m_matrix(np.linspace(-5, 5, 40), probes)
        assert np.all(M >= 0.0) and np.all(M <= 1.0)

    def test_degenerate_scores_single_threshold(self):
        X = np.random.default_rng(0).standard_normal((50, 1))
        r = np.full(50, 2.5)
        model = fit_cond_cdf(X, r, grid_size=10)
        assert model.grid.shape == (1,)
        assert model.m_hat(2.5, np.zeros((1, 1)))[0] > 0.9

    def test_m_matrix_agrees_with_m_hat(self):
        rng = np.random.default_rng(9)
        X = rng.standard_normal((60, 2))
        r = X[:, 0] + rng.standard_normal(60)
        model = fit_cond_cdf(X, r, grid_size=15)
        thetas = np.array([-10.0, model.grid[0], 0.1, model.grid[-1], 10.0])
        M = model.m_matrix(thetas, X)
        for i, th in enumerate(thetas):
            assert np.array_equal(M[i], model.m_hat(th, X))


class TestRearrange:
    def test_already_monotone(self):
        v = np.array([0.1, 0.3, 0.4])
        assert np.array_equal(monotone_rearrange(v), v)

    def test_sorts(self):
        assert np.array_equal(monotone_rearrange(np.array([0.3, 0.1, 0.4])), [0.1, 0.3, 0.4])

    def test_contraction_toward_monotone_targets(self):
        # rearrangement never increases L2 distance to a monotone target
        rng = np.random.default_rng(21)
        for _ in range(1000):
            k = rng.integers(2, 30)
            v = rng.standard_normal(k)
            target = np.sort(rng.standard_normal(k))
            d_orig = np.linalg.norm(v - target)
            d_rearr = np.linalg.norm(monotone_rearrange(v) - target)
            assert d_rearr <= d_orig + 1e-12


class TestOraclePair:
    def test_holds_callables(self):
        pair = OraclePair(pi=lambda X: np.ones(X.shape[0]), m=lambda th, X: np.zeros(X.shape[0]))
        X = np.zeros((3, 2))
        assert np.all(pair.pi(X) == 1.0)
        assert pair.grid is None
