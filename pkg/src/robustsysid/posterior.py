"""Gaussian conditional computations shared by every estimator.

Given hyperparameters ``theta = (lam, beta, tau)`` the impulse response has
posterior ``N(g_hat, P)`` with ``P = (U^T S^{-1} U + (lam K)^{-1})^{-1}``,
``S = diag(tau)``. We solve in whitened coordinates ``g = L z`` where
``L = D^{-1} W^{1/2}`` is the kernel square root, so the information matrix is
``L^T U^T S^{-1} U L + I/lam`` and never involves ``beta**-n``.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg
from scipy.stats import norm

from . import kernel as kern
from ._linalg import chol_logdet, cholesky_jitter
from .exceptions import ParameterError, ShapeError
from .noise_models import log_prior_tau


@dataclass(frozen=True)
class Hyperparameters:
    """Kernel scale/decay and per-sample noise variances.

    With a ``grouping`` the per-sample ``tau`` is the block expansion of the
    grouped values, exposed as :attr:`upsilon`.
    """

    lam: float
    beta: float
    tau: np.ndarray
    grouping: object = None

    def __post_init__(self):
        tau = np.asarray(self.tau, dtype=float).ravel()
        if not (np.isfinite(self.lam) and self.lam > 0):
            raise ParameterError(f"lambda must be positive, got {self.lam!r}")
        kern.check_beta(self.beta)
        if tau.size == 0 or not np.all(tau > 0) or not np.all(np.isfinite(tau)):
            raise ParameterError("noise variances must be finite and positive")
        if self.grouping is not None and self.grouping.N != tau.size:
            raise ParameterError("grouping does not match the number of variances")
        object.__setattr__(self, "tau", tau)
        object.__setattr__(self, "lam", float(self.lam))
        object.__setattr__(self, "beta", float(self.beta))

    @property
    def upsilon(self):
        if self.grouping is None:
            return self.tau
        return self.grouping.collapse(self.tau)

    def kernel_params(self, n):
        return kern.KernelParams(self.lam, self.beta, n)

    def as_vector(self):
        """``[lam, beta, tau...]``, or ``[lam, beta, upsilon...]`` when grouped."""
        return np.concatenate([[self.lam, self.beta], self.upsilon])


@dataclass(frozen=True)
class PosteriorState:
    g_hat: np.ndarray
    P: np.ndarray
    y_hat: np.ndarray
    s_diag: np.ndarray
    dg_hat: np.ndarray
    h_diag: np.ndarray
    eps: np.ndarray
    d: np.ndarray


def _check_shapes(U, y, tau):
    if U.ndim != 2 or U.shape[0] != y.size or tau.size != y.size:
        raise ShapeError(f"U {U.shape}, y {y.shape}, tau {tau.shape} are inconsistent")


def compute_posterior(U, y, theta):
    """Posterior mean ``g_hat`` and covariance ``P`` of the impulse response."""
    U = np.asarray(U, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    _check_shapes(U, y, theta.tau)
    n = U.shape[1]
    L = kern.kernel_sqrt(theta.kernel_params(n))
    isd = 1.0 / np.sqrt(theta.tau)
    B = (U * isd[:, None]) @ L
    A = B.T @ B + np.eye(n) / theta.lam
    ctx = dict(lam=theta.lam, beta=theta.beta, min_tau=float(theta.tau.min()))
    C = cholesky_jitter(A, ctx)
    Ainv = linalg.cho_solve((C, True), np.eye(n))
    z_hat = linalg.cho_solve((C, True), B.T @ (y * isd))
    P = L @ Ainv @ L.T
    P = 0.5 * (P + P.T)
    return L @ z_hat, P


def predictor_stats(U, g_hat, P):
    """Output predictor ``U g_hat`` and the diagonal of ``U P U^T``."""
    U = np.asarray(U, dtype=float)
    if U.shape[1] != g_hat.size or P.shape != (g_hat.size, g_hat.size):
        raise ShapeError("regressor, mean and covariance sizes disagree")
    y_hat = U @ g_hat
    s_diag = np.maximum(np.einsum("ij,ij->i", U @ P, U), 0.0)
    return y_hat, s_diag


def residual_energies(y, y_hat, s_diag):
    """``eps_t = (y_t - yhat_t)^2 + s_tt``."""
    y, y_hat, s_diag = (np.asarray(a, dtype=float) for a in (y, y_hat, s_diag))
    if not (y.shape == y_hat.shape == s_diag.shape):
        raise ShapeError("residual energy operands must share a shape")
    return (y - y_hat) ** 2 + s_diag


def differential_energies(g_hat, P):
    """``(D g_hat, diag(D P D^T), d)`` with ``d_i = (D g_hat)_i^2 + (D P D^T)_ii``."""
    g_hat = np.asarray(g_hat, dtype=float)
    dg = g_hat.copy()
    dg[:-1] -= g_hat[1:]
    pd = np.diag(P)
    h = pd.copy()
    h[:-1] += pd[1:] - 2.0 * np.diag(P, k=1)
    h = np.maximum(h, 0.0)
    return dg, h, dg * dg + h


def posterior_state(U, y, theta):
    """E-step bundle: posterior moments plus the residual and differential energies."""
    g_hat, P = compute_posterior(U, y, theta)
    y_hat, s_diag = predictor_stats(U, g_hat, P)
    eps = residual_energies(y, y_hat, s_diag)
    dg, h, d = differential_energies(g_hat, P)
    return PosteriorState(g_hat=g_hat, P=P, y_hat=y_hat, s_diag=s_diag,
                          dg_hat=dg, h_diag=h, eps=eps, d=d)


def output_covariance_factor(U, theta):
    """Cholesky factor of ``Sigma_y = lam U K U^T + diag(tau)``."""
    n = U.shape[1]
    B = U @ kern.kernel_sqrt(theta.kernel_params(n))
    Sy = theta.lam * (B @ B.T) + np.diag(theta.tau)
    ctx = dict(lam=theta.lam, beta=theta.beta, min_tau=float(theta.tau.min()))
    return cholesky_jitter(Sy, ctx)


def map_objective(theta, U, y, model):
    """``log p(y | theta) + log p(theta)`` with flat priors on ``lam`` and ``beta``.

    Grouped hyperparameters contribute one prior term per block.
    """
    U = np.asarray(U, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    _check_shapes(U, y, theta.tau)
    C = output_covariance_factor(U, theta)
    alpha = linalg.solve_triangular(C, y, lower=True)
    loglik = -0.5 * (y.size * math.log(2 * math.pi) + chol_logdet(C) + alpha @ alpha)
    return loglik + float(np.sum(log_prior_tau(theta.upsilon, model)))


def credibility_bounds(g_hat, P, level=0.99):
    """Pointwise two-sided Gaussian credibility band ``g_hat +- z sqrt(diag P)``."""
    if not 0.0 < level < 1.0:
        raise ParameterError(f"level must lie in (0, 1), got {level!r}")
    z = norm.ppf(0.5 + level / 2.0)
    half = z * np.sqrt(np.maximum(np.diag(P), 0.0))
    return g_hat - half, g_hat + half
