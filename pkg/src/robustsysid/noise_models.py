"""Heavy-tailed noise models written as Gaussian scale mixtures.

Each noise sample is ``N(0, tau_t)`` with a random variance ``tau_t``:
exponential with mean ``sigma2`` for the Laplacian, inverse gamma with shape
``nu/2`` and scale ``(nu-2) sigma2 / 2`` for Student's t. This module holds the
densities, the closed-form M-step variance updates (per sample and grouped),
and the grid selection of the Student degrees of freedom.
"""

import enum
import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.special import gammaln

from .exceptions import ParameterError, ShapeError
from .signals import make_rng

NU_INF = math.inf
DEFAULT_NU_GRID = (2.01, 2.25, 2.5, 2.75, 3.0, 5.0, 7.5, 10.0, 15.0, 50.0, NU_INF)
TAU_FLOOR_REL = 1e-8


class NoiseKind(str, enum.Enum):
    GAUSSIAN = "gaussian"
    LAPLACIAN = "laplacian"
    STUDENT = "student"


@dataclass(frozen=True)
class NoiseModel:
    """Noise family with nominal variance ``sigma2``.

    For Student's t, ``nu`` is either a fixed value > 2 or ``NU_INF`` (the
    Gaussian limit). Leaving ``nu=None`` selects ``nu`` automatically from
    ``nu_grid`` during EM.
    """

    kind: NoiseKind
    sigma2: float
    nu: float = None
    nu_grid: tuple = None

    def __post_init__(self):
        object.__setattr__(self, "kind", NoiseKind(self.kind))
        if not (np.isfinite(self.sigma2) and self.sigma2 > 0):
            raise ParameterError(f"sigma2 must be positive, got {self.sigma2!r}")
        if self.kind is not NoiseKind.STUDENT:
            if self.nu is not None or self.nu_grid is not None:
                raise ParameterError("nu only applies to the Student model")
            return
        if self.nu is not None:
            if not self.nu > 2:
                raise ParameterError(f"fixed nu must exceed 2, got {self.nu!r}")
        else:
            grid = tuple(float(v) for v in (self.nu_grid or DEFAULT_NU_GRID))
            if not grid or any(not v > 2 for v in grid):
                raise ParameterError("nu grid must be nonempty with every entry > 2")
            object.__setattr__(self, "nu_grid", grid)

    @classmethod
    def gaussian(cls, sigma2):
        return cls(NoiseKind.GAUSSIAN, sigma2)

    @classmethod
    def laplacian(cls, sigma2):
        return cls(NoiseKind.LAPLACIAN, sigma2)

    @classmethod
    def student(cls, sigma2, nu):
        return cls(NoiseKind.STUDENT, sigma2, nu=nu)

    @classmethod
    def student_auto(cls, sigma2, grid=DEFAULT_NU_GRID):
        return cls(NoiseKind.STUDENT, sigma2, nu_grid=tuple(grid))

    @property
    def is_auto(self):
        return self.kind is NoiseKind.STUDENT and self.nu is None

    def with_nu(self, nu):
        """Fixed-``nu`` copy, used for the working model inside an auto-``nu`` run."""
        return replace(self, nu=nu, nu_grid=None)

    def with_sigma2(self, sigma2):
        return replace(self, sigma2=sigma2)


@dataclass(frozen=True)
class Grouping:
    """Partition of ``N`` samples into ``p`` contiguous blocks of size ``m = N/p``."""

    N: int
    p: int

    def __post_init__(self):
        if self.p < 1 or self.N < 1 or self.N % self.p:
            raise ParameterError(f"N={self.N} is not divisible into p={self.p} blocks")

    @property
    def m(self):
        return self.N // self.p

    def blocks(self):
        m = self.m
        return [slice(i * m, (i + 1) * m) for i in range(self.p)]

    def expand(self, upsilon):
        """Per-sample variances from the block values."""
        upsilon = np.asarray(upsilon, dtype=float)
        if upsilon.shape != (self.p,):
            raise ShapeError(f"expected {self.p} block values, got shape {upsilon.shape}")
        return np.repeat(upsilon, self.m)

    def collapse(self, tau):
        """Block values read off a per-sample vector (first sample of each block)."""
        return np.asarray(tau, dtype=float)[:: self.m].copy()


def tau_floor(sigma2):
    return TAU_FLOOR_REL * sigma2


def _laplace_update(e, sigma2, m):
    # (m s2/4)(sqrt(1 + 8e/(m^2 s2)) - 1), rewritten to avoid cancellation at small e
    e = np.asarray(e, dtype=float)
    root = np.sqrt(1.0 + 8.0 * e / (m * m * sigma2))
    return np.maximum(2.0 * e / (m * (root + 1.0)), tau_floor(sigma2))


def _student_update(e, sigma2, nu, m):
    e = np.asarray(e, dtype=float)
    if math.isinf(nu):
        return np.full_like(e, float(sigma2))
    raw = (e + (nu - 2.0) * sigma2) / (nu + (2 + m))
    return np.maximum(raw, tau_floor(sigma2))


def tau_update_laplacian(eps, sigma2):
    """Per-sample variance update under the Laplacian model (vectorized over ``eps``)."""
    return _laplace_update(eps, sigma2, 1)


def tau_update_student(eps, sigma2, nu):
    """Per-sample variance update under Student's t.

    ``nu = NU_INF`` returns ``sigma2`` exactly. At ``nu = 2`` this evaluates to
    ``eps / 5``.
    """
    if nu < 2:
        raise ParameterError(f"nu must be at least 2, got {nu!r}")
    return _student_update(eps, sigma2, nu, 1)


def group_residuals(y, y_hat, U, P, grouping):
    """Block residual energies ``||Y_i - Yhat_i||^2 + Tr(U_i P U_i^T)``.

    Only the diagonal blocks of ``U P U^T`` are touched, one at a time.
    """
    y = np.asarray(y, dtype=float)
    if grouping.N != y.size:
        raise ParameterError(f"grouping covers {grouping.N} samples, data has {y.size}")
    r = y - y_hat
    zeta = np.empty(grouping.p)
    for i, blk in enumerate(grouping.blocks()):
        Ub = U[blk]
        zeta[i] = r[blk] @ r[blk] + np.sum((Ub @ P) * Ub)
    return zeta


def upsilon_update(zeta, sigma2, m, model):
    """Grouped variance update for blocks of ``m`` samples."""
    if model.kind is NoiseKind.LAPLACIAN:
        return _laplace_update(zeta, sigma2, m)
    if model.kind is NoiseKind.STUDENT:
        if model.nu is None:
            raise ParameterError("resolve nu before the variance update")
        return _student_update(zeta, sigma2, model.nu, m)
    raise ParameterError("the Gaussian model keeps its variances fixed at sigma2")


def student_loglik(residuals, sigma2, nu):
    """Log-likelihood of i.i.d. residuals under unit-``sigma2`` Student's t.

    ``nu = NU_INF`` scores the ``N(0, sigma2)`` density. Sums use
    :func:`math.fsum`, so the value does not depend on the sample order.
    """
    v = np.asarray(residuals, dtype=float)
    N = v.size
    if math.isinf(nu):
        return -0.5 * N * math.log(2 * math.pi * sigma2) - math.fsum(v * v) / (2 * sigma2)
    s = (nu - 2.0) * sigma2
    const = gammaln((nu + 1) / 2) - gammaln(nu / 2) - 0.5 * math.log(math.pi * s)
    return N * const - (nu + 1) / 2 * math.fsum(np.log1p(v * v / s))


def select_nu(residuals, sigma2, grid=DEFAULT_NU_GRID):
    """Grid value of ``nu`` maximizing the residual log-likelihood.

    Ties go to the smaller ``nu``.
    """
    grid = sorted(float(v) for v in grid)
    if not grid:
        raise ParameterError("nu grid is empty")
    best_nu, best = grid[0], -math.inf
    for nu in grid:
        ll = student_loglik(residuals, sigma2, nu)
        if ll > best:
            best_nu, best = nu, ll
    return best_nu


def log_prior_tau(tau, model):
    """``log p(tau)`` of the mixing density (0 for the Gaussian and ``nu = inf`` cases)."""
    tau = np.asarray(tau, dtype=float)
    if np.any(tau <= 0):
        raise ParameterError("variances must be positive")
    s2 = model.sigma2
    if model.kind is NoiseKind.LAPLACIAN:
        return -math.log(s2) - tau / s2
    if model.kind is NoiseKind.STUDENT:
        nu = model.nu
        if nu is None:
            raise ParameterError("resolve nu before evaluating the prior")
        if math.isinf(nu):
            return np.zeros_like(tau)
        b = (nu - 2.0) * s2 / 2.0
        return (nu / 2) * math.log(b) - gammaln(nu / 2) - (nu / 2 + 1) * np.log(tau) - b / tau
    return np.zeros_like(tau)


def sample_noise(model, N, seed, stream=()):
    """Noise drawn through the two-step scale-mixture construction."""
    rng = make_rng(seed, *stream)
    s2 = model.sigma2
    if model.kind is NoiseKind.GAUSSIAN:
        return np.sqrt(s2) * rng.standard_normal(N)
    if model.kind is NoiseKind.LAPLACIAN:
        tau = rng.exponential(s2, size=N)
    else:
        nu = model.nu
        if nu is None or not nu > 2:
            raise ParameterError("sampling Student noise needs a fixed nu > 2")
        if math.isinf(nu):
            return np.sqrt(s2) * rng.standard_normal(N)
        tau = ((nu - 2.0) * s2 / 2.0) / rng.gamma(nu / 2.0, 1.0, size=N)
    return np.sqrt(tau) * rng.standard_normal(N)
