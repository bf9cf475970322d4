"""Non-robust stable spline estimator with marginal-likelihood tuning (SS-ML).

Also provides the noise variance pre-estimate from a long least-squares FIR
fit, which every robust model uses as its nominal ``sigma2``.
"""

import numpy as np
from scipy import linalg
from scipy.optimize import minimize_scalar

from . import kernel as kern
from ._linalg import chol_logdet, cholesky_jitter
from .exceptions import DataError, ParameterError
from .noise_models import NoiseModel
from .posterior import Hyperparameters, compute_posterior, credibility_bounds, map_objective
from .signals import toeplitz_regressor

N_GRID = 50
N_ROUNDS = 3
LOG_LAMBDA_SPAN = 6.0


def default_fir_order(n, N):
    return max(1, min(2 * n, N // 2))


def estimate_noise_variance(dataset, fir_order=None, n=50):
    """Residual variance of a least-squares FIR fit of order ``fir_order``.

    The denominator is ``N - fir_order``. Defaults to ``min(2n, N // 2)`` taps.
    """
    N = dataset.N
    fir_order = default_fir_order(n, N) if fir_order is None else int(fir_order)
    if not 1 <= fir_order < N:
        raise ParameterError(f"fir_order must lie in [1, N-1], got {fir_order}")
    U = toeplitz_regressor(dataset.u, fir_order)
    coef, _, rank, _ = linalg.lstsq(U, dataset.y)
    if rank < fir_order:
        raise DataError(f"FIR regressor is rank deficient ({rank} < {fir_order})")
    r = dataset.y - U @ coef
    return float(r @ r) / (N - fir_order)


def marginal_likelihood_objective(lam, beta, sigma2, U, y):
    """``log det(Sigma_y) + y^T Sigma_y^{-1} y`` for ``Sigma_y = lam U K U^T + sigma2 I``."""
    U = np.asarray(U, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    B = U @ kern.kernel_sqrt(kern.KernelParams(lam, beta, U.shape[1]))
    Sy = lam * (B @ B.T) + sigma2 * np.eye(y.size)
    C = cholesky_jitter(Sy, dict(lam=lam, beta=beta, min_tau=sigma2))
    alpha = linalg.solve_triangular(C, y, lower=True)
    return chol_logdet(C) + alpha @ alpha


class _Profile:
    """Fast evaluation of the marginal-likelihood objective at fixed ``beta``.

    With the thin SVD ``U L = Q S V^T`` the objective over ``lam`` is

        N log s2 + sum log(1 + lam S^2 / s2) + |y_perp|^2 / s2 + sum (Q^T y)^2 / (s2 + lam S^2)
    """

    def __init__(self, U, y, sigma2, beta):
        B = U @ kern.kernel_sqrt(kern.KernelParams(1.0, beta, U.shape[1]))
        Q, s, _ = linalg.svd(B, full_matrices=False)
        self.s2 = s * s
        self.qy = Q.T @ y
        r = y - Q @ self.qy
        self.perp = float(r @ r)
        self.N = y.size
        self.sigma2 = sigma2
        self.prior_var = self.s2.sum() / self.N

    def __call__(self, lam):
        lam = np.asarray(lam, dtype=float)[..., None]
        v = self.sigma2 + lam * self.s2
        out = ((self.N - self.s2.size) * np.log(self.sigma2) + np.log(v).sum(-1)
               + self.perp / self.sigma2 + (self.qy ** 2 / v).sum(-1))
        return out


def _lambda_bounds(profile, y):
    # scale-aware range: lam * (prior output variance) spans 1e-6..1e6 of var(y)
    center = max(np.var(y), 1e-300) / max(profile.prior_var, 1e-300)
    return np.log(center) - LOG_LAMBDA_SPAN * np.log(10), np.log(center) + LOG_LAMBDA_SPAN * np.log(10)


def ml_hyperparameters(U, y, sigma2, n_grid=N_GRID, rounds=N_ROUNDS):
    """Minimize the marginal-likelihood objective over ``(lam, beta)``.

    Coarse ``n_grid x n_grid`` search over ``(log lam, beta)`` followed by
    ``rounds`` of bounded coordinate refinement. Returns ``(lam, beta, value)``.
    """
    y = np.asarray(y, dtype=float).ravel()
    best = (np.inf, None, None)
    bounds = {}
    for beta in np.linspace(kern.BETA_MIN, kern.BETA_MAX, n_grid):
        prof = _Profile(U, y, sigma2, beta)
        lo, hi = _lambda_bounds(prof, y)
        bounds[beta] = (lo, hi)
        loglam = np.linspace(lo, hi, n_grid)
        vals = prof(np.exp(loglam))
        k = int(np.argmin(vals))
        if vals[k] < best[0]:
            best = (float(vals[k]), float(np.exp(loglam[k])), float(beta))
    value, lam, beta = best
    lo_all = min(b[0] for b in bounds.values())
    hi_all = max(b[1] for b in bounds.values())

    for _ in range(rounds):
        prof = _Profile(U, y, sigma2, beta)
        res = minimize_scalar(lambda t: float(prof(np.exp(t))), bounds=(lo_all, hi_all),
                              method="bounded", options={"xatol": 1e-8})
        if res.fun < value:
            value, lam = float(res.fun), float(np.exp(res.x))
        res = minimize_scalar(lambda b: float(_Profile(U, y, sigma2, b)(lam)),
                              bounds=(kern.BETA_MIN, kern.BETA_MAX), method="bounded",
                              options={"xatol": 1e-8})
        if res.fun < value:
            value, beta = float(res.fun), float(res.x)
    return lam, beta, value


def fit_ss_ml(dataset, n, sigma2):
    """SS-ML estimate: ML-tuned ``(lam, beta)`` and the posterior mean at ``tau = sigma2``."""
    from .em import EMTrace, Estimate

    U = toeplitz_regressor(dataset.u, n)
    lam, beta, _ = ml_hyperparameters(U, dataset.y, sigma2)
    theta = Hyperparameters(lam, beta, np.full(dataset.N, float(sigma2)))
    g_hat, P = compute_posterior(U, dataset.y, theta)
    lower, upper = credibility_bounds(g_hat, P, 0.99)
    obj = map_objective(theta, U, dataset.y, NoiseModel.gaussian(sigma2))
    trace = EMTrace(iterations=[(theta, obj)], converged=True, stop_reason="closed_form")
    return Estimate(g_hat=g_hat, lower99=lower, upper99=upper, theta=theta, nu=None,
                    trace=trace, sigma2=float(sigma2), P=P)
