"""EM iterations for MAP estimation of ``(lam, beta, tau)``.

Each iteration computes the posterior of the impulse response at the current
hyperparameters (E-step), then updates every variance in closed form, ``beta``
by a refined grid search and ``lam`` in closed form given ``beta`` (M-step).
"""

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import logsumexp

from . import kernel as kern
from .baseline import ml_hyperparameters
from .exceptions import ConditioningError, DegenerateInputError, ParameterError
from .noise_models import (NoiseKind, group_residuals, select_nu, tau_update_laplacian,
                           tau_update_student, upsilon_update)
from .posterior import (Hyperparameters, credibility_bounds, map_objective,
                        posterior_state)
from .signals import toeplitz_regressor


@dataclass(frozen=True)
class EMOptions:
    """Controls for :func:`run_em`.

    ``nu_every`` re-selects an automatic ``nu`` every that many iterations.
    ``fixed_kernel`` freezes ``(lam, beta)`` at their initial values.
    """

    max_iter: int = 200
    rel_tol: float = 1e-3
    beta_grid_points: int = 2000
    beta_refinements: int = 2
    grouping: object = None
    track_objective: bool = False
    nu_every: int = 1
    fixed_kernel: bool = False

    def __post_init__(self):
        if self.max_iter < 1:
            raise ParameterError("max_iter must be at least 1")
        if not self.rel_tol > 0:
            raise ParameterError("rel_tol must be positive")
        if self.beta_grid_points < 2 or self.nu_every < 1:
            raise ParameterError("beta grid needs >= 2 points and nu_every >= 1")


@dataclass
class EMTrace:
    iterations: list = field(default_factory=list)
    converged: bool = False
    stop_reason: str = "max_iter"

    @property
    def objectives(self):
        return [obj for _, obj in self.iterations]

    @property
    def thetas(self):
        return [theta for theta, _ in self.iterations]


@dataclass
class Estimate:
    g_hat: np.ndarray
    lower99: np.ndarray
    upper99: np.ndarray
    theta: Hyperparameters
    nu: float
    trace: EMTrace
    sigma2: float
    P: np.ndarray = field(default=None, repr=False)

    @property
    def n_iter(self):
        return max(len(self.trace.iterations) - 1, 1)


def _log_weights(betas, n):
    """``-log W_beta`` for each row of ``betas``: shape ``(len(betas), n)``."""
    betas = np.atleast_1d(np.asarray(betas, dtype=float))
    i = np.arange(1, n + 1)
    logw = -np.outer(np.log(betas), i) - np.log1p(-betas)[:, None]
    logw[:, -1] = -n * np.log(betas)
    return logw


def _check_d(d):
    d = np.asarray(d, dtype=float).ravel()
    if d.size == 0 or np.any(d < 0) or not np.any(d > 0):
        raise DegenerateInputError("differential energies must be nonnegative and not all zero")
    return d


def q_beta(beta, d):
    """Profiled ``beta`` objective ``n log(sum_i d_i w_i(beta)) + log det K_beta``.

    This is ``Q0`` minimized over ``lam`` at fixed ``beta``, up to a constant.
    Accepts a scalar or an array of ``beta`` values.
    """
    d = _check_d(d)
    n = d.size
    betas = np.atleast_1d(np.asarray(beta, dtype=float))
    if np.any(betas < kern.BETA_MIN) or np.any(betas > kern.BETA_MAX):
        raise ParameterError("beta outside the kernel domain")
    logw = _log_weights(betas, n)
    with np.errstate(divide="ignore"):
        logd = np.log(d)
    lse = logsumexp(logd + logw, axis=1)
    logdet = -logw.sum(axis=1)
    q = n * lse + logdet
    return q if np.ndim(beta) else float(q[0])


def update_beta(d, options=None, incumbent=None):
    """Grid minimizer of :func:`q_beta` with two 10x local refinements.

    A uniform grid over the kernel domain is refined around the incumbent
    twice; ties go to the smaller ``beta``. If ``incumbent`` (the current
    ``beta``) scores strictly better than the grid result it is kept, so the
    step never increases the objective.
    """
    options = options or EMOptions()
    d = _check_d(d)
    grid = np.linspace(kern.BETA_MIN, kern.BETA_MAX, options.beta_grid_points)
    q = q_beta(grid, d)
    k = int(np.argmin(q))
    best, best_q = grid[k], q[k]
    step = grid[1] - grid[0]
    for _ in range(options.beta_refinements):
        local = np.linspace(best - step, best + step, 21)
        local = local[(local >= kern.BETA_MIN) & (local <= kern.BETA_MAX)]
        ql = q_beta(local, d)
        k = int(np.argmin(ql))
        if ql[k] < best_q or (ql[k] == best_q and local[k] < best):
            best, best_q = local[k], ql[k]
        step /= 10.0
    if incumbent is not None and q_beta(incumbent, d) < best_q:
        return float(incumbent)
    return float(best)


def update_lambda(d, beta):
    """``lam = mean(d_i w_i(beta))``."""
    d = _check_d(d)
    logw = _log_weights([kern.check_beta(beta)], d.size)[0]
    with np.errstate(divide="ignore"):
        return float(np.exp(logsumexp(np.log(d) + logw) - math.log(d.size)))


def q_tau(eps, tau, model, m=1):
    """Per-variance M-step objective, constants dropped.

    ``eps/tau + m log tau - 2 log p(tau)``; ``m > 1`` is the grouped form with
    ``eps`` a block energy.
    """
    eps = np.asarray(eps, dtype=float)
    tau = np.asarray(tau, dtype=float)
    s2 = model.sigma2
    if model.kind is NoiseKind.LAPLACIAN:
        return eps / tau + m * np.log(tau) + 2.0 * tau / s2
    if model.kind is NoiseKind.STUDENT and not math.isinf(model.nu):
        return (eps + (model.nu - 2.0) * s2) / tau + (model.nu + 2 + m) * np.log(tau)
    return eps / tau + m * np.log(tau)


def q_components(theta, state, model):
    """Split of the EM surrogate into ``Q0(lam, beta)`` and per-sample ``Q_t(tau_t)``.

    ``state`` is the E-step posterior at the reference hyperparameters;
    ``theta`` is the candidate being scored.
    """
    n = state.g_hat.size
    kp = theta.kernel_params(n)
    kinv_g = kern.apply_kernel_inverse(kp, state.g_hat)
    q0 = (state.g_hat @ kinv_g + kern.log_det_kernel(kp)
          + np.trace(kern.apply_kernel_inverse(kp, state.P)))
    return float(q0), q_tau(state.eps, theta.tau, model)


def initialize_theta(dataset, sigma2, n, grouping=None):
    """Marginal-likelihood ``(lam, beta)`` with every noise variance at ``sigma2``."""
    U = toeplitz_regressor(dataset.u, n)
    lam, beta, _ = ml_hyperparameters(U, dataset.y, sigma2)
    return Hyperparameters(lam, beta, np.full(dataset.N, float(sigma2)), grouping=grouping)


def _update_variances(state, theta, U, y, model, grouping):
    s2 = model.sigma2
    if model.kind is NoiseKind.GAUSSIAN:
        return np.full(y.size, s2)
    if grouping is not None:
        zeta = group_residuals(y, state.y_hat, U, state.P, grouping)
        return grouping.expand(upsilon_update(zeta, s2, grouping.m, model))
    if model.kind is NoiseKind.LAPLACIAN:
        return tau_update_laplacian(state.eps, s2)
    return tau_update_student(state.eps, s2, model.nu)


def run_em(dataset, n, model, options=None, theta0=None):
    """Robust impulse response estimate by EM on the hyperparameter posterior.

    Parameters
    ----------
    dataset : Dataset
    n : int
        Number of impulse response coefficients.
    model : NoiseModel
        Noise family; ``model.sigma2`` is the nominal noise variance.
    options : EMOptions, optional
    theta0 : Hyperparameters, optional
        Starting point. Defaults to :func:`initialize_theta`.

    Returns
    -------
    Estimate
        Posterior mean at the final hyperparameters, 99% bounds and the trace.
        Hitting ``max_iter`` is reported through ``trace.converged``, not raised.
    """
    options = options or EMOptions()
    grouping = options.grouping
    U = toeplitz_regressor(dataset.u, n)
    y = dataset.y
    s2 = model.sigma2
    if theta0 is None:
        theta = initialize_theta(dataset, s2, n, grouping)
    else:
        theta = replace(theta0, grouping=grouping)
    if model.kind is NoiseKind.GAUSSIAN or (model.kind is NoiseKind.STUDENT
                                            and model.nu is not None and math.isinf(model.nu)):
        theta = replace(theta, tau=np.full(dataset.N, s2))

    nu = model.nu
    work = model
    trace = EMTrace()
    k = 0
    try:
        for k in range(options.max_iter):
            state = posterior_state(U, y, theta)
            if model.is_auto and k % options.nu_every == 0:
                nu = select_nu(y - state.y_hat, s2, model.nu_grid)
            if model.kind is NoiseKind.STUDENT:
                work = model.with_nu(nu)
            obj = map_objective(theta, U, y, work) if options.track_objective else None
            trace.iterations.append((theta, obj))

            tau = _update_variances(state, theta, U, y, work, grouping)
            if options.fixed_kernel:
                beta, lam = theta.beta, theta.lam
            else:
                beta = update_beta(state.d, options, incumbent=theta.beta)
                lam = update_lambda(state.d, beta)
            new = Hyperparameters(lam, beta, tau, grouping=grouping)
            old_vec = theta.as_vector()
            change = np.linalg.norm(new.as_vector() - old_vec) / np.linalg.norm(old_vec)
            theta = new
            if change < options.rel_tol:
                trace.converged = True
                trace.stop_reason = "tolerance"
                break
        state = posterior_state(U, y, theta)
    except ConditioningError as exc:
        exc.iteration = k
        raise
    obj = map_objective(theta, U, y, work) if options.track_objective else None
    trace.iterations.append((theta, obj))
    lower, upper = credibility_bounds(state.g_hat, state.P, 0.99)
    return Estimate(g_hat=state.g_hat, lower99=lower, upper99=upper, theta=theta,
                    nu=nu if model.kind is NoiseKind.STUDENT else None, trace=trace,
                    sigma2=float(s2), P=state.P)
