"""Outlier-robust kernel-based identification of linear SISO systems."""

from .baseline import estimate_noise_variance, fit_ss_ml, marginal_likelihood_objective
from .bench import BenchConfig, FitReport, fit_score, prediction_fit, run_monte_carlo
from .em import EMOptions, EMTrace, Estimate, run_em
from .estimators import RobustKernelIdentifier, StableSplineML
from .exceptions import (ConditioningError, DataError, DegenerateInputError, ParameterError,
                         ShapeError)
from .kernel import KernelParams, build_kernel, kernel_factors, weight_vector
from .noise_models import NU_INF, Grouping, NoiseKind, NoiseModel
from .posterior import Hyperparameters, PosteriorState
from .signals import Dataset, ImpulseResponse, random_system, simulate_system, toeplitz_regressor

__version__ = "0.1.0"

__all__ = [
    "BenchConfig", "ConditioningError", "DataError", "Dataset", "DegenerateInputError",
    "EMOptions", "EMTrace", "Estimate", "FitReport", "Grouping", "Hyperparameters",
    "ImpulseResponse", "KernelParams", "NU_INF", "NoiseKind", "NoiseModel", "ParameterError",
    "PosteriorState", "RobustKernelIdentifier", "ShapeError", "StableSplineML",
    "build_kernel", "estimate_noise_variance", "fit_score", "fit_ss_ml", "kernel_factors",
    "marginal_likelihood_objective", "prediction_fit", "random_system", "run_em",
    "run_monte_carlo", "simulate_system", "toeplitz_regressor", "weight_vector",
]
