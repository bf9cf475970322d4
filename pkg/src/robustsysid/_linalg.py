import numpy as np
from scipy import linalg

from .exceptions import ConditioningError

JITTER_START = 1e-10
JITTER_MAX = 1e-4


def cholesky_jitter(a, context=None):
    """Lower Cholesky factor of SPD ``a``, adding escalating diagonal jitter on failure.

    Jitter starts at ``1e-10 * trace/n`` and grows by 10x up to ``1e-4 * trace/n``.
    ``context`` is a dict of hyperparameters attached to the raised error.
    """
    try:
        return linalg.cholesky(a, lower=True, check_finite=True)
    except (linalg.LinAlgError, ValueError):
        pass
    n = a.shape[0]
    scale = np.trace(a) / n
    if not np.isfinite(scale) or scale <= 0:
        raise ConditioningError("matrix is not positive definite", **(context or {}))
    jitter = JITTER_START
    while jitter <= JITTER_MAX * (1 + 1e-12):
        try:
            return linalg.cholesky(a + jitter * scale * np.eye(n), lower=True)
        except linalg.LinAlgError:
            jitter *= 10.0
    raise ConditioningError("SPD factorization failed after jitter escalation",
                            **(context or {}))


def chol_logdet(chol):
    return 2.0 * np.log(np.diag(chol)).sum()
