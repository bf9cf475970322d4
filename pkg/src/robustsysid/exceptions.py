"""Exception hierarchy shared by all modules."""

import numpy as np


class ParameterError(ValueError):
    """A scalar parameter lies outside its admissible domain."""


class ShapeError(ValueError):
    """Array operands have inconsistent shapes."""


class DataError(ValueError):
    """The identification data cannot support the requested fit."""


class DegenerateInputError(ValueError):
    """An input makes the requested quantity undefined (e.g. log of zero)."""


class ConditioningError(np.linalg.LinAlgError):
    """An SPD factorization failed even after jitter escalation.

    Attributes
    ----------
    lam, beta, min_tau : float or None
        Hyperparameters in force when the failure happened.
    iteration : int or None
        EM iteration index, filled in by the EM driver.
    """

    def __init__(self, message, lam=None, beta=None, min_tau=None, iteration=None):
        super().__init__(message)
        self.lam = lam
        self.beta = beta
        self.min_tau = min_tau
        self.iteration = iteration

    def __str__(self):
        parts = [super().__str__()]
        ctx = {"lambda": self.lam, "beta": self.beta, "min_tau": self.min_tau,
               "iteration": self.iteration}
        extra = ", ".join(f"{k}={v:.6g}" if isinstance(v, float) else f"{k}={v}"
                          for k, v in ctx.items() if v is not None)
        if extra:
            parts.append(f"({extra})")
        return " ".join(parts)
