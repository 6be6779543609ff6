"""Data-generating processes, Monte Carlo runners and coverage evaluation.

This is the only module allowed to read the sealed ground-truth outcomes of
target units (via :func:`sealed_outcomes`); everything upstream fits on the
observed triples alone.
"""

from __future__ import annotations

import csv
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
from scipy.special import ndtr

from . import drp as drp_mod
from .baselines import fit_wcp, wcp_predict_bounds
from .data import Dataset, apply_missingness, load_airfoil, spawn_rng, split
from .drp import DrpConfig, ScoreSpec, fit_efcp, fit_full, fit_split2, fit_split3, predict_bounds
from .nuisance import OraclePair, expit
from .scores import fit_ridge

METHODS = ("full", "split3", "split2", "wcp", "efcp", "cv")

KS_MEAN_COEF = np.array([27.4, 13.7, 13.7, 13.7])
KS_MEAN_INTERCEPT = 210.0
KS_PROPENSITY_COEF = np.array([-1.0, 0.5, -0.25, -0.1])
DEFAULT_EFCP_LAMBDAS = (0.01, 0.1, 1.0, 10.0, 100.0)


@dataclass(frozen=True)
class DgpSpec:
    kind: str = "kang-schafer"
    n: int = 2000
    d: int = 4
    noise_sd: float = 1.0

    def __post_init__(self):
        if self.kind != "kang-schafer":
            raise ValueError(f"unknown DGP {self.kind!r}")
        if self.n < 50:
            raise ValueError("DGP size must be at least 50")


def ks_mean(X: np.ndarray) -> np.ndarray:
    return KS_MEAN_INTERCEPT + X @ KS_MEAN_COEF


def ks_propensity(X: np.ndarray) -> np.ndarray:
    return expit(X @ KS_PROPENSITY_COEF)


def gen_kang_schafer(n: int, rng, noise_sd: float = 1.0) -> Dataset:
    """Draw the synthetic linear-Gaussian population and hide target labels."""
    X = rng.standard_normal((n, 4))
    y = ks_mean(X) + noise_sd * rng.standard_normal(n)
    full = Dataset(X, np.zeros(n, dtype=np.int64), y)
    return apply_missingness(full, ks_propensity, rng)


def sample_target(n_test: int, rng, noise_sd: float = 1.0) -> tuple[np.ndarray, np.ndarray]:
    """Fresh draws from the target population by rejection on the t flag."""
    xs, got = [], 0
    while got < n_test:
        X = rng.standard_normal((2 * n_test, 4))
        keep = rng.random(2 * n_test) < ks_propensity(X)
        X = X[keep]
        xs.append(X)
        got += X.shape[0]
    X = np.concatenate(xs)[:n_test]
    y = ks_mean(X) + noise_sd * rng.standard_normal(n_test)
    return X, y


def sealed_outcomes(ds: Dataset) -> np.ndarray:
    """Evaluation-only accessor for the hidden ground-truth outcomes."""
    if ds.sealed_y is None:
        raise ValueError("dataset carries no sealed outcomes")
    return ds.sealed_y


def kang_schafer_oracles(
    pi_mode: str = "true",
    m_mode: str = "true",
    noise_sd: float = 1.0,
) -> "callable":
    """Factory for OraclePair builders on the synthetic DGP.

    pi_mode: "true" (exact odds) or "one" (pretends no shift).
    m_mode: "true" (exact CDF of the fitted absolute-residual score) or
    "half" (the constant 1/2, deliberately wrong but bounded monotone).
    Returns a callable(score_model) -> OraclePair for DrpConfig.nuisance.
    """

    def build(score_model) -> OraclePair:
        if pi_mode == "true":
            pi = lambda X: np.exp(X @ KS_PROPENSITY_COEF)
        elif pi_mode == "one":
            pi = lambda X: np.ones(X.shape[0])
        else:
            raise ValueError(f"unknown pi_mode {pi_mode!r}")
        if m_mode == "half":
            m = lambda theta, X: np.full(X.shape[0], 0.5)
        elif m_mode == "true":
            if score_model.kind != "absolute-residual":
                raise ValueError("exact score CDF oracle implemented for the ridge score only")
            ridge = score_model.ridge

            def m(theta, X):
                if theta == np.inf:
                    return np.ones(X.shape[0])
                if theta < 0:
                    return np.zeros(X.shape[0])
                delta = ks_mean(X) - ridge.predict(X)
                return ndtr((theta - delta) / noise_sd) - ndtr((-theta - delta) / noise_sd)

        else:
            raise ValueError(f"unknown m_mode {m_mode!r}")
        return OraclePair(pi=pi, m=m, grid=None)

    return build


def eval_coverage(lower, upper, y, w_trunc: Optional[float] = None) -> tuple[float, float]:
    """Fraction of outcomes inside their set and the (truncated) mean width."""
    lower = np.asarray(lower, dtype=np.float64)
    upper = np.asarray(upper, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    cov = float(np.mean((y >= lower) & (y <= upper)))
    widths = np.maximum(upper - lower, 0.0)
    widths[upper < lower] = 0.0
    if w_trunc is not None:
        widths = np.minimum(widths, w_trunc)
    return cov, float(np.mean(widths))


@dataclass(frozen=True)
class McResult:
    method: str
    runs: int
    coverage: float
    width: float
    coverage_se: float
    width_se: float
    infinite_width_frac: float
    records: list = field(repr=False, default_factory=list)


def _aggregate(method: str, records: list) -> McResult:
    covs = np.array([r["coverage"] for r in records])
    wids = np.array([r["width"] for r in records])
    infs = np.array([r["infinite_width_frac"] for r in records])
    runs = len(records)
    se = lambda v: float(np.std(v, ddof=1) / np.sqrt(runs)) if runs > 1 else 0.0
    return McResult(
        method=method,
        runs=runs,
        coverage=float(covs.mean()),
        width=float(wids.mean()),
        coverage_se=se(covs),
        width_se=se(wids),
        infinite_width_frac=float(infs.mean()),
        records=records,
    )


def _fit_cv_split2(ds: Dataset, cfg: DrpConfig, lambdas: Sequence[float], rng):
    """Ridge lambda by 5-fold MSE cross-validation on part 1, then split2 DRP."""
    plan = split(ds, (0.5, 0.5), rng)
    a, b = plan.parts
    lab = a[ds.t[a] == 0]
    fold_rng = rng
    perm = fold_rng.permutation(lab.size)
    folds = np.array_split(perm, 5)
    sse = np.zeros(len(lambdas))
    for f in folds:
        hold = lab[f]
        train = lab[np.setdiff1d(perm, f, assume_unique=True)]
        for j, lam in enumerate(lambdas):
            model = fit_ridge(ds.x[train], ds.y[train], lam)
            resid = ds.y[hold] - model.predict(ds.x[hold])
            sse[j] += float(resid @ resid)
    best = ScoreSpec(kind="absolute-residual", ridge_lambda=float(lambdas[int(np.argmin(sse))]))
    cfg2 = replace(cfg, score=best)
    score_model = drp_mod._fit_score(ds, a, cfg2)
    nu = drp_mod._fit_nuisances(ds, a, cfg2, score_model)
    solution = drp_mod._solve_on(ds, b, cfg2, score_model, nu)
    return drp_mod.FittedDrp(score_model, nu, solution, cfg.alpha, plan)


def _method_bounds(method, ds, alpha, rng, X_test, wcp_trunc, efcp_lambdas, clip):
    cfg = DrpConfig(alpha=alpha, clip=clip)
    if method == "full":
        return predict_bounds(fit_full(ds, replace(cfg, variant="full")), X_test)
    if method == "split3":
        return predict_bounds(fit_split3(ds, replace(cfg, variant="split3"), rng), X_test)
    if method == "split2":
        return predict_bounds(fit_split2(ds, replace(cfg, variant="split2"), rng), X_test)
    if method == "wcp":
        model = fit_wcp(ds, rng, w_max=wcp_trunc, alpha=alpha, clip=clip)
        return wcp_predict_bounds(model, X_test)
    if method == "efcp":
        specs = [ScoreSpec(ridge_lambda=l) for l in efcp_lambdas]
        return fit_efcp(ds, specs, cfg, rng).predict_bounds(X_test)
    if method == "cv":
        return predict_bounds(_fit_cv_split2(ds, cfg, efcp_lambdas, rng), X_test)
    raise ValueError(f"unknown method {method!r}; valid: {', '.join(METHODS)}")


def _mc_one_rep(args):
    (dgp, methods, alpha, seed, rep, n_test, wcp_trunc, efcp_lambdas, clip) = args
    ds = gen_kang_schafer(dgp.n, spawn_rng(seed, rep, 0), dgp.noise_sd)
    X_test, y_test = sample_target(n_test, spawn_rng(seed, rep, 1), dgp.noise_sd)
    out = {}
    for j, method in enumerate(methods):
        lo, up = _method_bounds(
            method, ds, alpha, spawn_rng(seed, rep, 2 + j), X_test, wcp_trunc, efcp_lambdas, clip
        )
        trunc = wcp_trunc if method == "wcp" else None
        cov, wid = eval_coverage(lo, up, y_test, trunc)
        inf_frac = float(np.mean(~np.isfinite(np.asarray(up) - np.asarray(lo))))
        out[method] = {"rep": rep, "coverage": cov, "width": wid, "infinite_width_frac": inf_frac}
    return rep, out


def run_mc(
    dgp: DgpSpec,
    methods: Sequence[str],
    runs: int,
    alpha: float,
    seed: int,
    n_test: int = 1000,
    wcp_trunc: float = 10.0,
    efcp_lambdas: Sequence[float] = DEFAULT_EFCP_LAMBDAS,
    clip: float = 0.99,
    workers: int = 1,
) -> list[McResult]:
    """Fresh data per run, every method fit on it, scored on fresh target draws."""
    for m in methods:
        if m not in METHODS:
            raise ValueError(f"unknown method {m!r}; valid: {', '.join(METHODS)}")
    argses = [
        (dgp, tuple(methods), alpha, seed, rep, n_test, wcp_trunc, tuple(efcp_lambdas), clip)
        for rep in range(runs)
    ]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=min(workers, runs)) as pool:
            rows = list(pool.map(_mc_one_rep, argses, chunksize=max(1, runs // (4 * workers))))
    else:
        rows = [_mc_one_rep(a) for a in argses]
    rows.sort(key=lambda x: x[0])
    return [_aggregate(m, [out[m] for _, out in rows]) for m in methods]


@dataclass(frozen=True)
class CondCovRecord:
    x_f: np.ndarray
    norm: float
    coverage: float
    width: float


def run_conditional(
    method: str = "split3-cqr",
    n_points: int = 200,
    n_draws: int = 100,
    n: int = 2000,
    alpha: float = 0.1,
    seed: int = 0,
) -> list[CondCovRecord]:
    """Per-point coverage at fixed standard-normal test points.

    The test points stay fixed; each outcome draw comes with an independent
    refit, so the per-point coverage is marginal over both the outcome and
    the training randomness.
    """
    X_f = spawn_rng(seed, 1).standard_normal((n_points, 4))
    hits = np.zeros(n_points)
    widths = np.zeros(n_points)
    for k in range(n_draws):
        ds = gen_kang_schafer(n, spawn_rng(seed, 0, k))
        rng_m = spawn_rng(seed, 3, k)
        if method == "split3-cqr":
            cfg = DrpConfig(alpha=alpha, score=ScoreSpec(kind="cqr"))
            lo, up = predict_bounds(fit_split3(ds, cfg, rng_m), X_f)
        elif method == "wcp":
            lo, up = wcp_predict_bounds(fit_wcp(ds, rng_m, w_max=np.inf, alpha=alpha), X_f)
        else:
            raise ValueError(f"unknown conditional method {method!r}")
        y_f = ks_mean(X_f) + spawn_rng(seed, 2, k).standard_normal(n_points)
        hits += ((y_f >= lo) & (y_f <= up)).astype(np.float64)
        w = np.maximum(up - lo, 0.0)
        w[up < lo] = 0.0
        widths += w
    return [
        CondCovRecord(
            x_f=X_f[i],
            norm=float(np.linalg.norm(X_f[i])),
            coverage=float(hits[i] / n_draws),
            width=float(widths[i] / n_draws),
        )
        for i in range(n_points)
    ]


AIRFOIL_PROPENSITY_COEF = np.array([-1.0, 0.5, -0.25, -0.1, 0.0])


def airfoil_propensity(ds: Dataset):
    """Missingness model for the real data: logistic in the z-scored features."""
    mu = ds.x.mean(axis=0)
    sd = ds.x.std(axis=0)
    sd[sd == 0] = 1.0
    return lambda X: expit(((X - mu) / sd) @ AIRFOIL_PROPENSITY_COEF)


def run_real(
    source: "Dataset | str",
    runs: int,
    alpha: float,
    seed: int,
    w_max: float = 50.0,
    methods: Sequence[str] = ("full", "split3", "split2", "wcp"),
    clip: float = 0.99,
) -> list[McResult]:
    """Regenerate missingness per run and score on the held-out target labels."""
    ds0 = load_airfoil(source) if isinstance(source, str) else source
    if np.any(~np.isfinite(ds0.y)):
        raise ValueError("the real-data source must be fully labeled")
    prop = airfoil_propensity(ds0)
    per_method = {m: [] for m in methods}
    for rep in range(runs):
        ds = apply_missingness(ds0, prop, spawn_rng(seed, rep, 0))
        target = ds.t == 1
        if target.sum() == 0 or (~target).sum() == 0:
            continue
        X_test = ds.x[target]
        y_test = sealed_outcomes(ds)[target]
        for j, method in enumerate(methods):
            lo, up = _method_bounds(
                method, ds, alpha, spawn_rng(seed, rep, 2 + j), X_test, w_max,
                DEFAULT_EFCP_LAMBDAS, clip,
            )
            trunc = w_max if method == "wcp" else None
            cov, wid = eval_coverage(lo, up, y_test, trunc)
            inf_frac = float(np.mean(~np.isfinite(np.asarray(up) - np.asarray(lo))))
            per_method[method].append(
                {"rep": rep, "coverage": cov, "width": wid, "infinite_width_frac": inf_frac}
            )
    return [_aggregate(m, per_method[m]) for m in methods]


@dataclass(frozen=True)
class DiscreteMnarDgp:
    """Tiny enumerable selection model over scalar x and a four-point score.

    scale=0 makes selection ignore the outcome, which is exactly the
    explainable-shift (MAR) case; scale>0 tilts selection by the outcome
    through the log odds-ratio function gamma(x, y) = scale * y / y_max.
    The score is the outcome itself, so every law here enumerates exactly.
    """

    xs: tuple = (0.0, 1.0)
    px: tuple = (0.5, 0.5)
    ys: tuple = (0.0, 1.0, 2.0, 3.0)
    py: tuple = ((0.4, 0.3, 0.2, 0.1), (0.1, 0.2, 0.3, 0.4))
    eta_coef: tuple = (0.2, -0.4)
    scale: float = 0.0

    def _xidx(self, X: np.ndarray) -> np.ndarray:
        x0 = np.atleast_2d(X)[:, 0]
        return np.searchsorted(np.asarray(self.xs), x0)

    def eta_star(self, X: np.ndarray) -> np.ndarray:
        x0 = np.atleast_2d(X)[:, 0]
        return self.eta_coef[0] + self.eta_coef[1] * x0

    def gamma_star(self, X: np.ndarray, y: np.ndarray) -> np.ndarray:
        base = np.asarray(y, dtype=np.float64) / max(self.ys)
        return self.scale * base * np.ones(np.atleast_2d(X).shape[0])

    def _p_t0(self, j: int, l: int) -> float:
        return float(expit(self.eta_coef[0] + self.eta_coef[1] * self.xs[j]
                           + self.scale * self.ys[l] / max(self.ys)))

    def p_t1_given_x(self, j: int) -> float:
        return sum(self.py[j][l] * (1.0 - self._p_t0(j, l)) for l in range(len(self.ys)))

    def pi_marginal(self, X: np.ndarray) -> np.ndarray:
        js = self._xidx(X)
        vals = np.array([self.p_t1_given_x(j) for j in range(len(self.xs))])
        return vals[js] / (1.0 - vals[js])

    def m_star(self, theta: float, X: np.ndarray) -> np.ndarray:
        """P(R <= theta | x, T=1); under scale=0 this equals P(R <= theta | x)."""
        js = self._xidx(X)
        out = np.zeros(len(js))
        for i, j in enumerate(js):
            num = den = 0.0
            for l, yv in enumerate(self.ys):
                w = self.py[j][l] * (1.0 - self._p_t0(j, l))
                den += w
                if yv <= theta:
                    num += w
            out[i] = num / den
        return out

    def m_given_x(self, theta: float, X: np.ndarray) -> np.ndarray:
        """P(R <= theta | x), the MAR conditional CDF (T-free)."""
        js = self._xidx(X)
        cdf = np.array(
            [sum(self.py[j][l] for l, yv in enumerate(self.ys) if yv <= theta)
             for j in range(len(self.xs))]
        )
        return cdf[js]

    def target_cdf(self, theta: float) -> float:
        num = den = 0.0
        for j in range(len(self.xs)):
            for l, yv in enumerate(self.ys):
                w = self.px[j] * self.py[j][l] * (1.0 - self._p_t0(j, l))
                den += w
                if yv <= theta:
                    num += w
        return num / den

    def r_alpha(self, alpha: float) -> float:
        # the 1e-12 slack absorbs round-off when alpha was derived from the
        # same enumeration (1 - (1 - F) need not equal F in floats)
        for yv in self.ys:
            if self.target_cdf(yv) >= 1.0 - alpha - 1e-12:
                return float(yv)
        return float("inf")

    def exact_alpha_at(self, level_index: int) -> float:
        """Alpha such that the target CDF hits 1 - alpha exactly at ys[level_index]."""
        return 1.0 - self.target_cdf(self.ys[level_index])

    def sample(self, n: int, rng) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """Draw (X, y, t, r) with r = y; y of target units is still returned."""
        js = rng.choice(len(self.xs), size=n, p=np.asarray(self.px))
        y = np.empty(n)
        t = np.empty(n, dtype=np.int64)
        for j in range(len(self.xs)):
            sel = js == j
            k = int(sel.sum())
            if k == 0:
                continue
            ls = rng.choice(len(self.ys), size=k, p=np.asarray(self.py[j]))
            y[sel] = np.asarray(self.ys)[ls]
            p0 = np.array([self._p_t0(j, l) for l in ls])
            t[sel] = (rng.random(k) >= p0).astype(np.int64)
        X = np.asarray(self.xs, dtype=np.float64)[js].reshape(-1, 1)
        return X, y, t, y.copy()

    def population_if_mean(self, theta: float, pi_fn, m_fn, alpha: float) -> float:
        """Exact E[IF] by enumeration over (x, y, t); no Monte Carlo."""
        total = 0.0
        for j, xv in enumerate(self.xs):
            X1 = np.array([[xv]])
            pi_v = float(np.asarray(pi_fn(X1)).reshape(-1)[0])
            m_v = float(np.asarray(m_fn(theta, X1)).reshape(-1)[0])
            for l, yv in enumerate(self.ys):
                p_xy = self.px[j] * self.py[j][l]
                p_t0 = self._p_t0(j, l)
                ind = 1.0 if yv <= theta else 0.0
                total += p_xy * p_t0 * pi_v * (ind - m_v)
                total += p_xy * (1.0 - p_t0) * (m_v - (1.0 - alpha))
        return total

    def population_sens_if_mean(self, theta: float, eta_fn, m_fn, gamma_fn, alpha: float) -> float:
        total = 0.0
        for j, xv in enumerate(self.xs):
            X1 = np.array([[xv]])
            eta_v = float(np.asarray(eta_fn(X1)).reshape(-1)[0])
            m_v = float(np.asarray(m_fn(theta, X1)).reshape(-1)[0])
            for l, yv in enumerate(self.ys):
                p_xy = self.px[j] * self.py[j][l]
                p_t0 = self._p_t0(j, l)
                gam_v = float(np.asarray(gamma_fn(X1, np.array([yv]))).reshape(-1)[0])
                w = np.exp(-(eta_v + gam_v))
                ind = 1.0 if yv <= theta else 0.0
                total += p_xy * p_t0 * w * (ind - m_v)
                total += p_xy * (1.0 - p_t0) * (m_v - (1.0 - alpha))
        return total


def write_records_csv(results: Sequence[McResult], path: str, seed: int) -> None:
    """Per-run records as (method, run, coverage, width, seed) rows."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["method", "run", "coverage", "width", "seed"])
        for res in results:
            for rec in res.records:
                writer.writerow([res.method, rec["rep"], repr(rec["coverage"]), repr(rec["width"]), seed])


def summary_dict(results: Sequence[McResult], config: dict) -> dict:
    return {
        "config": config,
        "methods": {
            res.method: {
                "runs": res.runs,
                "coverage": res.coverage,
                "coverage_se": res.coverage_se,
                "width": res.width,
                "width_se": res.width_se,
                "infinite_width_frac": res.infinite_width_frac,
            }
            for res in results
        },
    }


def write_json_summary(summary: dict, path: str) -> None:
    with open(path, "w") as fh:
        json.dump(summary, fh, sort_keys=True, indent=2)
        fh.write("\n")
