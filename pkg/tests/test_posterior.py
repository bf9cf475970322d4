import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import multivariate_normal

from robustsysid.kernel import KernelParams, build_kernel
from robustsysid.noise_models import NoiseModel
from robustsysid.posterior import (Hyperparameters, compute_posterior, credibility_bounds,
                                   differential_energies, map_objective, posterior_state,
                                   predictor_stats, residual_energies)


def dense_posterior(U, y, theta):
    """Independent oracle: regularized normal equations with explicit inverses."""
    n = U.shape[1]
    K = theta.lam * build_kernel(KernelParams(theta.lam, theta.beta, n))
    Si = np.diag(1.0 / theta.tau)
    A = U.T @ Si @ U + np.linalg.inv(K)
    P = np.linalg.inv(A)
    return np.linalg.solve(A, U.T @ Si @ y), P


def random_instance(rng, n=None, N=None):
    n = n or int(rng.integers(1, 11))
    N = N or int(rng.integers(1, 21))
    U = rng.standard_normal((N, n))
    y = rng.standard_normal(N)
    theta = Hyperparameters(float(rng.uniform(0.2, 3.0)), float(rng.uniform(0.3, 0.9)),
                            rng.uniform(0.1, 2.0, size=N))
    return U, y, theta


# scalar case: K_beta = beta, so lam = 1/beta gives lam*K = 1
SCALAR = (np.array([[1.0]]), np.array([2.0]), Hyperparameters(2.0, 0.5, [1.0]))


class TestComputePosterior:
    def test_scalar_hand_solve(self):
        g, P = compute_posterior(*SCALAR)
        np.testing.assert_allclose(g, [1.0], rtol=1e-14)
        np.testing.assert_allclose(P, [[0.5]], rtol=1e-14)

    def test_prior_dominates_under_huge_noise(self, rng):
        U = rng.standard_normal((12, 4))
        theta = Hyperparameters(1.3, 0.7, np.full(12, 1e12))
        g, P = compute_posterior(U, rng.standard_normal(12), theta)
        np.testing.assert_allclose(g, 0.0, atol=1e-10)
        np.testing.assert_allclose(P, 1.3 * build_kernel(KernelParams(1.3, 0.7, 4)), rtol=1e-9)

    def test_identity_regressor(self):
        g, P = compute_posterior(np.eye(1), np.array([3.0]), Hyperparameters(2.0, 0.5, [1.0]))
        np.testing.assert_allclose(g, [1.5])
        np.testing.assert_allclose(P, [[0.5]])

    def test_dense_oracle_equivalence(self, rng):
        for _ in range(50):
            U, y, theta = random_instance(rng)
            g, P = compute_posterior(U, y, theta)
            g_ref, P_ref = dense_posterior(U, y, theta)
            np.testing.assert_allclose(g, g_ref, rtol=1e-8, atol=1e-10 * np.abs(g_ref).max())
            np.testing.assert_allclose(P, P_ref, rtol=1e-7, atol=1e-10 * np.abs(P_ref).max())

    def test_covariance_symmetric_psd(self, rng):
        U, y, theta = random_instance(rng, n=8, N=15)
        _, P = compute_posterior(U, y, theta)
        np.testing.assert_array_equal(P, P.T)
        assert np.linalg.eigvalsh(P).min() > -1e-14

    def test_tiny_beta_underflow_is_finite(self, rng):
        U = rng.standard_normal((40, 100))
        theta = Hyperparameters(1.0, 1e-4, np.ones(40))
        g, P = compute_posterior(U, rng.standard_normal(40), theta)
        assert np.all(np.isfinite(g)) and np.all(np.isfinite(P))


class TestPredictor:
    def test_scalar_continuation(self):
        g, P = compute_posterior(*SCALAR)
        y_hat, s = predictor_stats(SCALAR[0], g, P)
        np.testing.assert_allclose(y_hat, [1.0])
        np.testing.assert_allclose(s, [0.5])

    def test_zero_covariance(self, rng):
        U = rng.standard_normal((6, 3))
        _, s = predictor_stats(U, np.ones(3), np.zeros((3, 3)))
        np.testing.assert_array_equal(s, 0.0)

    def test_dense_diagonal(self, rng):
        U, y, theta = random_instance(rng, n=5, N=8)
        g, P = compute_posterior(U, y, theta)
        _, s = predictor_stats(U, g, P)
        np.testing.assert_allclose(s, np.diag(U @ P @ U.T), rtol=1e-12, atol=1e-15)


class TestEnergies:
    @pytest.mark.parametrize("y,y_hat,s,expected", [(2, 1, 0.5, 1.5), (1, 1, 0, 0), (0, 3, 1, 10)])
    def test_residual_energy(self, y, y_hat, s, expected):
        out = residual_energies(np.array([y], float), np.array([y_hat], float), np.array([s], float))
        assert out[0] == pytest.approx(expected)

    def test_differential_scalar(self):
        _, _, d = differential_energies(np.array([1.0]), np.array([[0.5]]))
        np.testing.assert_allclose(d, [1.5])

    def test_differential_constant_sequence(self):
        dg, h, d = differential_energies(np.full(4, 2.0), np.zeros((4, 4)))
        np.testing.assert_array_equal(d, [0, 0, 0, 4.0])

    def test_differential_dense(self, rng):
        g = rng.standard_normal(6)
        X = rng.standard_normal((6, 6))
        P = X @ X.T
        D = np.eye(6) - np.eye(6, k=1)
        ref = (D @ g) ** 2 + np.diag(D @ P @ D.T)
        _, _, d = differential_energies(g, P)
        np.testing.assert_allclose(d, ref, rtol=1e-12)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**31 - 1))
    def test_energy_decomposition(self, seed):
        rng = np.random.default_rng(seed)
        U, y, theta = random_instance(rng)
        st_ = posterior_state(U, y, theta)
        assert np.all(st_.eps >= (y - st_.y_hat) ** 2)
        assert np.all(st_.d >= st_.dg_hat ** 2)
        assert np.all(st_.s_diag >= 0) and np.all(st_.h_diag >= 0)


class TestMapObjective:
    def test_scalar_gaussian_and_laplacian(self):
        U, y, theta = SCALAR
        gauss = map_objective(theta, U, y, NoiseModel.gaussian(1.0))
        assert gauss == pytest.approx(-0.5 * np.log(4 * np.pi) - 1.0, abs=1e-12)
        assert gauss == pytest.approx(-2.2655, abs=1e-4)
        lap = map_objective(theta, U, y, NoiseModel.laplacian(1.0))
        assert lap == pytest.approx(gauss - 1.0, abs=1e-12)

    def test_quadratic_form_vanishes(self, rng):
        U, y, theta = random_instance(rng, n=4, N=10)
        model = NoiseModel.gaussian(1.0)
        values = [map_objective(theta, U, s * y, model) for s in (1.0, 0.1, 0.0)]
        assert values[0] < values[1] < values[2]
        Sy = theta.lam * U @ build_kernel(KernelParams(1, theta.beta, 4)) @ U.T + np.diag(theta.tau)
        assert values[2] == pytest.approx(-0.5 * np.linalg.slogdet(2 * np.pi * Sy)[1], rel=1e-12)

    def test_dense_density_oracle(self, rng):
        for _ in range(10):
            U, y, theta = random_instance(rng)
            n = U.shape[1]
            Sy = (theta.lam * U @ build_kernel(KernelParams(1, theta.beta, n)) @ U.T
                  + np.diag(theta.tau))
            ref = multivariate_normal(np.zeros(y.size), Sy).logpdf(y)
            got = map_objective(theta, U, y, NoiseModel.gaussian(1.0))
            assert got == pytest.approx(ref, rel=1e-10)


class TestBounds:
    def test_zero_variance_collapses(self):
        lo, hi = credibility_bounds(np.array([1.0]), np.zeros((1, 1)), 0.99)
        assert lo[0] == hi[0] == 1.0

    def test_normal_quantile(self):
        lo, hi = credibility_bounds(np.zeros(1), np.eye(1), 0.99)
        assert hi[0] == pytest.approx(2.5758, abs=1e-4)
        assert lo[0] == -hi[0]

    @pytest.mark.parametrize("level", [0.5, 0.9, 0.999])
    def test_symmetric(self, rng, level):
        g = rng.standard_normal(5)
        X = rng.standard_normal((5, 5))
        lo, hi = credibility_bounds(g, X @ X.T, level)
        np.testing.assert_allclose(hi - g, g - lo, rtol=1e-12)
