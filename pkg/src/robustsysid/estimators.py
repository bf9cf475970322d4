"""scikit-learn compatible front end.

The "features" are the input samples ``u_0..u_{N-1}`` and the targets the
outputs ``y_1..y_N``; ``predict`` simulates the identified FIR model on a new
input. Both estimators support ``get_params``/``set_params``/``clone``.
"""

from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_io, check_signal
from .baseline import estimate_noise_variance, fit_ss_ml
from .em import EMOptions, run_em
from .exceptions import ParameterError
from .noise_models import DEFAULT_NU_GRID, Grouping, NoiseModel
from .signals import Dataset, toeplitz_regressor

NOISE_CHOICES = ("gaussian", "laplace", "student", "student-auto")


def make_noise_model(noise, sigma2, nu=None, nu_grid=None):
    """Map a CLI-style noise name to a :class:`NoiseModel`."""
    if noise == "gaussian":
        return NoiseModel.gaussian(sigma2)
    if noise == "laplace":
        return NoiseModel.laplacian(sigma2)
    if noise == "student":
        if nu is None:
            raise ParameterError("noise='student' needs nu (use 'student-auto' to select it)")
        return NoiseModel.student(sigma2, nu)
    if noise == "student-auto":
        return NoiseModel.student_auto(sigma2, nu_grid or DEFAULT_NU_GRID)
    raise ParameterError(f"unknown noise model {noise!r}; choose from {NOISE_CHOICES}")


class _FIRMixin:
    def predict(self, u):
        """Simulated output ``U(u) g_hat`` (zero initial conditions)."""
        check_is_fitted(self, "coef_")
        u = check_signal(u, "u")
        return toeplitz_regressor(u, self.coef_.size) @ self.coef_

    def _sigma2(self, dataset):
        if self.sigma2 is not None:
            return float(self.sigma2)
        return estimate_noise_variance(dataset, self.fir_order, n=self.n)

    def _store(self, est):
        self.estimate_ = est
        self.coef_ = est.g_hat
        self.lower_, self.upper_ = est.lower99, est.upper99
        self.lambda_ = est.theta.lam
        self.beta_ = est.theta.beta
        self.tau_ = est.theta.upsilon
        self.sigma2_ = est.sigma2
        self.n_iter_ = est.n_iter
        self.converged_ = est.trace.converged


class RobustKernelIdentifier(_FIRMixin, RegressorMixin, BaseEstimator):
    """Outlier-robust impulse response estimator (EM-L / EM-S family).

    Parameters
    ----------
    n : int, default=50
        Number of impulse response coefficients.
    noise : {'gaussian', 'laplace', 'student', 'student-auto'}, default='student-auto'
    nu : float, optional
        Degrees of freedom for ``noise='student'`` (``float('inf')`` allowed).
    nu_grid : sequence of float, optional
        Candidates for ``'student-auto'``.
    groups : int, optional
        Share each noise variance across ``N/groups`` consecutive samples.
    sigma2 : float, optional
        Nominal noise variance; estimated from a long FIR fit when omitted.
    fir_order : int, optional
        FIR length for the ``sigma2`` estimate.
    max_iter, tol : EM stopping controls.
    track_objective : bool, default=False
        Record the MAP objective at each iterate in ``trace_``.
    """

    def __init__(self, n=50, noise="student-auto", nu=None, nu_grid=None, groups=None,
                 sigma2=None, fir_order=None, max_iter=200, tol=1e-3, track_objective=False):
        self.n = n
        self.noise = noise
        self.nu = nu
        self.nu_grid = nu_grid
        self.groups = groups
        self.sigma2 = sigma2
        self.fir_order = fir_order
        self.max_iter = max_iter
        self.tol = tol
        self.track_objective = track_objective

    def fit(self, u, y, init=None):
        """Identify from input ``u`` and output ``y``.

        ``init`` optionally supplies starting hyperparameters (e.g. from a
        fitted :class:`StableSplineML`'s ``estimate_.theta``).
        """
        u, y = check_io(u, y)
        dataset = Dataset(u, y)
        sigma2 = self._sigma2(dataset)
        model = make_noise_model(self.noise, sigma2, self.nu, self.nu_grid)
        grouping = Grouping(dataset.N, int(self.groups)) if self.groups else None
        options = EMOptions(max_iter=self.max_iter, rel_tol=self.tol, grouping=grouping,
                            track_objective=self.track_objective)
        est = run_em(dataset, self.n, model, options, theta0=init)
        self._store(est)
        self.nu_ = est.nu
        self.trace_ = est.trace
        return self


class StableSplineML(_FIRMixin, RegressorMixin, BaseEstimator):
    """Non-robust SS-ML estimator (Gaussian noise, marginal-likelihood tuning)."""

    def __init__(self, n=50, sigma2=None, fir_order=None):
        self.n = n
        self.sigma2 = sigma2
        self.fir_order = fir_order

    def fit(self, u, y):
        u, y = check_io(u, y)
        dataset = Dataset(u, y)
        self._store(fit_ss_ml(dataset, self.n, self._sigma2(dataset)))
        return self
