"""Hot numeric inner loops, numba-jitted when available.

The two kernels here dominate runtime in the Monte Carlo experiments:
the pinball-loss solver (called twice per CQR fit) and the logistic
IRLS core (called once per propensity fit and once per threshold of a
conditional-CDF fit, so ~50x per model).

Set DRIFTSETS_PURE_NUMPY=1 to force the plain numpy fallbacks. The
``benchmarks/bench_kernels.py`` script times both paths side by side.
"""

from __future__ import annotations

import os

import numpy as np


def _numba_wanted() -> bool:
    if os.environ.get("DRIFTSETS_PURE_NUMPY", "0").strip().lower() in ("1", "true", "yes"):
        return False
    try:
        import numba  # noqa: F401
    except ImportError:
        return False
    return True


NUMBA_ENABLED = _numba_wanted()


def _pinball_objective(A, y, tau, w):
    u = y - A @ w
    return np.mean(np.where(u >= 0.0, tau * u, (tau - 1.0) * u))


def _pinball_solve(A, y, tau, w0, subgrad_iters, step_scale, eps0, n_stages):
    """Drive the mean pinball loss down over coefficients of the design A.

    Phase 1 is full-batch subgradient descent with step step_scale/sqrt(k)
    and running-average iterates. Phase 2 is iteratively reweighted least
    squares with residual weights floored at a shrinking epsilon. Returns
    (w, iterations); the caller owns the convergence declaration (a vertex
    polish finishes the piecewise-linear problem exactly).
    """
    n, p = A.shape
    w = w0.copy()
    best_w = w0.copy()
    best_obj = _pinball_objective(A, y, tau, w)
    avg_w = w.copy()
    total_it = 0

    for k in range(1, subgrad_iters + 1):
        total_it += 1
        u = y - A @ w
        g_u = np.where(u >= 0.0, tau, tau - 1.0)
        grad = -(A.T @ g_u) / n
        w = w - (step_scale / np.sqrt(k)) * grad
        avg_w = avg_w + (w - avg_w) / k
        ob = _pinball_objective(A, y, tau, w)
        if ob < best_obj:
            best_obj = ob
            best_w = w.copy()
    ob = _pinball_objective(A, y, tau, avg_w)
    if ob < best_obj:
        best_obj = ob
        best_w = avg_w.copy()

    w = best_w.copy()
    scale = max(np.std(y), 1e-8)
    eps = eps0 * scale
    eps_floor = 1e-10 * scale
    eye = np.eye(p)

    for _stage in range(n_stages):
        for _inner in range(60):
            total_it += 1
            u = y - A @ w
            c = np.where(u >= 0.0, tau, 1.0 - tau)
            v = c / np.maximum(np.abs(u), eps)
            Av = A * v.reshape(n, 1)
            H = Av.T @ A
            jitter = 1e-12 * (np.trace(H) / p + 1.0)
            w_new = np.linalg.solve(H + jitter * eye, Av.T @ y)
            if np.max(np.abs(w_new - w)) < 1e-14 * (1.0 + np.max(np.abs(w))):
                w = w_new
                break
            w = w_new
        ob = _pinball_objective(A, y, tau, w)
        if ob < best_obj:
            best_obj = ob
            best_w = w.copy()
        else:
            w = best_w.copy()  # restart the next smoothing stage from the incumbent
        eps = max(eps * 0.1, eps_floor)
    return best_w, total_it


def _logistic_irls(A, target, max_iter, rel_tol):
    """Newton-Raphson logistic regression of a 0/1 target on the design A.

    Returns (w, iterations, converged, diverged); diverged flags the
    coefficient blow-up that signals (quasi-)perfect separation.
    """
    n, p = A.shape
    w = np.zeros(p)
    eye = np.eye(p)
    prev_ll = -1e300
    converged = False
    diverged = False
    it = 0
    for it in range(1, max_iter + 1):
        z = A @ w
        zc = np.minimum(np.maximum(z, -35.0), 35.0)
        prob = 1.0 / (1.0 + np.exp(-zc))
        grad = A.T @ (target - prob)
        wgt = prob * (1.0 - prob) + 1e-12
        H = (A * wgt.reshape(n, 1)).T @ A
        jitter = 1e-10 * (np.trace(H) / p + 1.0)
        delta = np.linalg.solve(H + jitter * eye, grad)
        ll0 = np.sum(target * zc - (np.maximum(zc, 0.0) + np.log1p(np.exp(-np.abs(zc)))))
        step = 1.0
        for _ls in range(30):
            w_try = w + step * delta
            z_try = np.minimum(np.maximum(A @ w_try, -35.0), 35.0)
            ll_try = np.sum(
                target * z_try - (np.maximum(z_try, 0.0) + np.log1p(np.exp(-np.abs(z_try))))
            )
            if ll_try >= ll0:
                w = w_try
                ll0 = ll_try
                break
            step *= 0.5
        if np.sqrt(np.sum(w * w)) > 1e3:
            diverged = True
            break
        if abs(ll0 - prev_ll) <= rel_tol * (abs(prev_ll) + 1.0):
            converged = True
            break
        prev_ll = ll0
    return w, it, converged, diverged


if NUMBA_ENABLED:
    from numba import njit

    _pinball_objective = njit(cache=True)(_pinball_objective)
    pinball_solve = njit(cache=True)(_pinball_solve)
    logistic_irls = njit(cache=True)(_logistic_irls)
else:
    pinball_solve = _pinball_solve
    logistic_irls = _logistic_irls
