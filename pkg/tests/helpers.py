"""Independent oracles shared across the test suite.

Everything here is deliberately naive (quadrature, grids, double loops,
dense gradient descent) and never calls the code paths it checks.
"""

import math

import numpy as np


AIRFOIL_ROW = "{f}\t{a}\t{c}\t{v}\t{d}\t{y}\n"


def make_airfoil_text(n_rows, freq=800.0, rng=None):
    """Synthetic rows in the UCI airfoil file format (not the real data)."""
    rows = []
    for i in range(n_rows):
        if rng is None:
            u = np.zeros(5)
        else:
            u = rng.random(5)
        f = freq * (1.0 + 3.0 * u[0]) + i
        a = 0.5 + 8.0 * u[1]
        c = 0.05 + 0.25 * u[2]
        v = 30.0 + 45.0 * u[3]
        d = 0.001 + 0.04 * u[4]
        noise = 0.0 if rng is None else float(rng.standard_normal()) * 2.0
        y = 110.0 + 3.0 * np.log(f) - 0.8 * a + 0.1 * v - 200.0 * d + noise
        rows.append(AIRFOIL_ROW.format(f=f, a=a, c=c, v=v, d=d, y=y))
    return "".join(rows)


def normal_cdf(z):
    z = np.asarray(z, dtype=np.float64)
    return 0.5 * (1.0 + np.vectorize(math.erf)(z / math.sqrt(2.0)))


def gauss_hermite_expectation(f, sd: float, order: int = 80) -> float:
    """E[f(Z)] for Z ~ N(0, sd^2) by Gauss-Hermite quadrature."""
    nodes, weights = np.polynomial.hermite.hermgauss(order)
    return float(np.sum(weights * f(nodes * math.sqrt(2.0) * sd)) / math.sqrt(math.pi))


def pinball_objective(X, y, tau, coef, intercept):
    u = y - (X @ coef + intercept)
    return float(np.mean(u * (tau - (u < 0))))


def grid_refined_pinball(X, y, tau, rounds: int = 6, width: float = 4.0, pts: int = 41):
    """Brute-force (coef, intercept) minimizer for 1-d X by shrinking grids."""
    assert X.shape[1] == 1
    c0, b0 = 0.0, float(np.median(y))
    half = width * max(np.std(y), 1.0)
    best = (c0, b0, pinball_objective(X, y, tau, np.array([c0]), b0))
    for _ in range(rounds):
        cs = np.linspace(best[0] - half, best[0] + half, pts)
        bs = np.linspace(best[1] - half, best[1] + half, pts)
        for c in cs:
            for b in bs:
                ob = pinball_objective(X, y, tau, np.array([c]), b)
                if ob < best[2]:
                    best = (c, b, ob)
        half /= 8.0
    return best  # (coef, intercept, objective)


def ridge_gd_oracle(X, y, lam, tol: float = 1e-10, max_iter: int = 500_000):
    """Dense gradient descent on the ridge objective, run to a tiny gradient."""
    n, d = X.shape
    A = np.concatenate([X, np.ones((n, 1))], axis=1)
    P = np.zeros(d + 1)
    P[:d] = lam
    L = np.linalg.eigvalsh(2 * (A.T @ A) + 2 * np.diag(P)).max()
    w = np.zeros(d + 1)
    for _ in range(max_iter):
        grad = 2 * (A.T @ (A @ w - y)) + 2 * P * w
        if np.linalg.norm(grad) < tol:
            break
        w = w - grad / L
    return w[:d], w[d]


def brute_weighted_quantile(values, weights, q):
    """O(n^2) scan: smallest v whose cumulative normalized weight reaches q."""
    values = np.asarray(values, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64) / np.sum(weights)
    for v in np.sort(values):
        if np.sum(weights[values <= v]) >= q:
            return float(v)
    return float(np.sort(values)[-1])


def brute_solve_scan(x, r, t, pi_fn, m_fn, alpha, extra=None):
    """Exhaustive candidate scan reimplementation of the quantile solve."""
    labeled = t == 0
    cands = list(r[labeled])
    if extra is not None:
        cands.extend(v for v in np.asarray(extra) if np.isfinite(v))
    cands = sorted(set(float(c) for c in cands))
    n = len(t)
    pis = np.asarray(pi_fn(x[labeled]), dtype=np.float64)

    def mean_at(theta):
        m_vals = np.broadcast_to(np.asarray(m_fn(theta, x), dtype=np.float64), (n,))
        total = 0.0
        j = 0
        for i in range(n):
            if t[i] == 0:
                total += pis[j] * ((1.0 if r[i] <= theta else 0.0) - m_vals[i])
                j += 1
            else:
                total += m_vals[i] - (1.0 - alpha)
        return total / n

    for c in cands:
        if mean_at(c) >= 0.0:
            return c, mean_at(c)
    return math.inf, mean_at(math.inf)
