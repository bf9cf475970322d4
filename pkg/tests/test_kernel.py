import numpy as np
import pytest

from robustsysid.exceptions import ParameterError, ShapeError
from robustsysid.kernel import (BETA_MAX, BETA_MIN, KernelParams, apply_kernel_inverse,
                                build_kernel, kernel_factors, kernel_sqrt, log_det_kernel,
                                weight_vector)


def reconstruct(f):
    dinv = np.linalg.inv(f.delta)
    return dinv @ np.diag(f.w_diag) @ dinv.T


class TestBuildKernel:
    def test_two_by_two(self):
        K = build_kernel(KernelParams(1.0, 0.5, 2))
        np.testing.assert_array_equal(K, [[0.5, 0.25], [0.25, 0.25]])

    def test_scalar(self):
        np.testing.assert_allclose(build_kernel(KernelParams(1.0, 0.9, 1)), [[0.9]], rtol=1e-15)

    def test_three_by_three(self):
        K = build_kernel(KernelParams(1.0, 0.5, 3))
        expected = [[0.5, 0.25, 0.125], [0.25, 0.25, 0.125], [0.125, 0.125, 0.125]]
        np.testing.assert_allclose(K, expected, rtol=1e-15)

    @pytest.mark.parametrize("beta", [0.0, 1.0, -0.1, 5e-5, 0.99995])
    def test_beta_outside_domain(self, beta):
        with pytest.raises(ParameterError):
            KernelParams(1.0, beta, 3)

    @pytest.mark.parametrize("beta", [BETA_MIN, 0.3, 0.9, BETA_MAX])
    def test_positive_definite(self, beta):
        for n in (1, 5, 50):
            K = build_kernel(KernelParams(1.0, beta, n))
            # Tiny-beta kernels underflow numerically; scale by the diagonal first.
            d = 1.0 / np.sqrt(np.diag(K))
            np.linalg.cholesky(d[:, None] * K * d[None, :])


class TestFactors:
    def test_hand_example(self):
        f = kernel_factors(KernelParams(1.0, 0.5, 2))
        np.testing.assert_allclose(f.w_diag, [0.25, 0.25], rtol=1e-15)
        np.testing.assert_array_equal(f.delta, [[1, -1], [0, 1]])
        np.testing.assert_allclose(reconstruct(f), [[0.5, 0.25], [0.25, 0.25]], rtol=1e-15)

    def test_single_tap(self):
        f = kernel_factors(KernelParams(1.0, 0.5, 1))
        np.testing.assert_allclose(f.w_diag, [0.5])

    @pytest.mark.parametrize("beta", list(np.linspace(BETA_MIN, BETA_MAX, 20)))
    @pytest.mark.parametrize("n", [1, 5, 50, 100])
    def test_reconstruction_grid(self, beta, n):
        p = KernelParams(1.0, beta, n)
        K = build_kernel(p)
        err = np.max(np.abs(reconstruct(kernel_factors(p)) - K))
        assert err <= 1e-9 * np.max(np.abs(K))

    def test_sqrt_factor(self):
        p = KernelParams(1.0, 0.8, 12)
        L = kernel_sqrt(p)
        np.testing.assert_allclose(L @ L.T, build_kernel(p), rtol=1e-13, atol=1e-15)

    def test_log_det(self):
        p = KernelParams(2.5, 0.7, 9)
        sign, ref = np.linalg.slogdet(p.lam * build_kernel(p))
        assert sign > 0
        np.testing.assert_allclose(log_det_kernel(p), ref, rtol=1e-12)


class TestWeightVector:
    def test_hand_example(self):
        np.testing.assert_allclose(weight_vector(KernelParams(1.0, 0.5, 2)), [4.0, 4.0])

    def test_single_tap(self):
        np.testing.assert_allclose(weight_vector(KernelParams(1.0, 0.5, 1)), [2.0])

    @pytest.mark.parametrize("beta", [1e-3, 0.2, 0.5, 0.95, 0.999])
    def test_reciprocity(self, beta):
        p = KernelParams(1.0, beta, 40)
        prod = weight_vector(p) * kernel_factors(p).w_diag
        np.testing.assert_allclose(prod, 1.0, atol=1e-12)


class TestKernelInverse:
    def test_inverse_of_kernel(self):
        p = KernelParams(1.0, 0.5, 2)
        np.testing.assert_allclose(apply_kernel_inverse(p, build_kernel(p)), np.eye(2),
                                   atol=1e-10)

    def test_scales_with_inverse_lambda(self, rng):
        v = rng.standard_normal(7)
        a = apply_kernel_inverse(KernelParams(1.0, 0.6, 7), v)
        b = apply_kernel_inverse(KernelParams(2.0, 0.6, 7), v)
        np.testing.assert_allclose(b, a / 2, rtol=1e-14)

    @pytest.mark.parametrize("beta", [0.3, 0.8, 0.95])
    def test_matches_dense_solve(self, rng, beta):
        p = KernelParams(1.7, beta, 20)
        X = rng.standard_normal((20, 3))
        ref = np.linalg.solve(p.lam * build_kernel(p), X)
        got = apply_kernel_inverse(p, X)
        np.testing.assert_allclose(got, ref, rtol=1e-8, atol=1e-8 * np.max(np.abs(ref)))

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            apply_kernel_inverse(KernelParams(1.0, 0.5, 3), np.ones(4))
