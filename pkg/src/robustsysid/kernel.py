"""First-order stable spline (TC) kernel and its bidiagonal factorization.

The kernel ``K[i, j] = beta**max(i, j)`` (1-based indices) factors as
``K = D^{-1} W D^{-T}`` with ``D`` upper bidiagonal (1 on the diagonal, -1 on
the superdiagonal) and ``W`` diagonal. Every inverse or log-determinant used
elsewhere in the package goes through this factorization.
"""

from dataclasses import dataclass

import numpy as np

from .exceptions import ParameterError, ShapeError

BETA_MIN = 1e-4
BETA_MAX = 0.9999


def check_beta(beta):
    beta = float(beta)
    if not (BETA_MIN <= beta <= BETA_MAX):
        raise ParameterError(
            f"beta={beta!r} outside the admissible range [{BETA_MIN}, {BETA_MAX}]")
    return beta


@dataclass(frozen=True)
class KernelParams:
    """Scale ``lam``, decay ``beta`` and length ``n`` of the prior ``N(0, lam*K_beta)``."""

    lam: float
    beta: float
    n: int

    def __post_init__(self):
        if not (np.isfinite(self.lam) and self.lam > 0):
            raise ParameterError(f"lambda must be positive, got {self.lam!r}")
        check_beta(self.beta)
        if int(self.n) != self.n or self.n < 1:
            raise ParameterError(f"n must be a positive integer, got {self.n!r}")


@dataclass(frozen=True)
class KernelFactors:
    delta: np.ndarray
    w_diag: np.ndarray


def _powers(beta, exponents):
    # exp(k log beta) rather than beta**k; underflow is left at 0.
    return np.exp(np.asarray(exponents, dtype=float) * np.log(beta))


def difference_matrix(n):
    """Upper-bidiagonal first-difference matrix ``D`` of size ``n``."""
    return np.eye(n) - np.eye(n, k=1)


def w_diag(beta, n):
    """Diagonal of ``W_beta``: ``(1-beta) beta**i`` for ``i < n`` and ``beta**n`` last."""
    beta = check_beta(beta)
    w = (1.0 - beta) * _powers(beta, np.arange(1, n + 1))
    w[-1] = _powers(beta, n)
    return w


def log_w_diag(beta, n):
    """``log`` of :func:`w_diag`, exact even where the powers underflow."""
    beta = check_beta(beta)
    logw = np.arange(1, n + 1) * np.log(beta) + np.log1p(-beta)
    logw[-1] = n * np.log(beta)
    return logw


def build_kernel(params):
    """Dense ``K_beta`` with entries ``beta**max(i, j)``."""
    idx = np.arange(1, params.n + 1)
    return _powers(params.beta, np.maximum.outer(idx, idx))


def kernel_factors(params):
    return KernelFactors(delta=difference_matrix(params.n),
                         w_diag=w_diag(params.beta, params.n))


def weight_vector(params):
    """Reciprocal of the ``W_beta`` diagonal, ``beta**-i / (1-beta)`` then ``beta**-n``."""
    return np.exp(-log_w_diag(params.beta, params.n))


def kernel_sqrt(params):
    """Upper-triangular ``L`` with ``L @ L.T == K_beta`` (``L = D^{-1} W^{1/2}``).

    Column ``j`` holds ``sqrt(W_j)`` in rows ``0..j`` and zeros below.
    """
    sw = np.sqrt(w_diag(params.beta, params.n))
    return np.triu(np.broadcast_to(sw, (params.n, params.n)))


def log_det_kernel(params):
    """``log det(lam * K_beta)``."""
    return params.n * np.log(params.lam) + log_w_diag(params.beta, params.n).sum()


def apply_kernel_inverse(params, x):
    """Return ``(lam K_beta)^{-1} x`` as ``D^T W^{-1} D x / lam``.

    ``x`` may be a vector or a matrix with ``n`` rows.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim not in (1, 2) or x.shape[0] != params.n:
        raise ShapeError(f"operand must have {params.n} rows, got shape {x.shape}")
    dx = x.copy()
    dx[:-1] -= x[1:]
    winv = weight_vector(params) / params.lam
    z = dx * (winv if x.ndim == 1 else winv[:, None])
    out = z.copy()
    out[1:] -= z[:-1]
    return out
