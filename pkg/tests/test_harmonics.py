from math import comb

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from sphdesign import geom
from sphdesign.harmonics import (HarmonicSpace, Poly, UnsupportedDimensionError, basis_values,
                                 eval_poly, exact_quadrature, exact_rule, grad_l1_norm,
                                 inner_product, integrate_abs, kernel, kernel_derivative,
                                 kernel_feature_gradients, kernel_features,
                                 kernel_second_derivative, linear_poly, random_poly,
                                 sphere_quadrature, spherical_gradient)


def tangent_fd(P, x, u, h=1e-6):
    """Central difference of P along the great circle through x with tangent u."""
    return (P(np.cos(h) * x + np.sin(h) * u) - P(np.cos(h) * x - np.sin(h) * u)) / (2 * h)


class TestSpace:
    @given(st.integers(1, 9), st.integers(0, 40))
    def test_dims_match_harmonic_count(self, d, t):
        # dim H_k = dim(homogeneous degree k) - dim(homogeneous degree k-2)
        sp = HarmonicSpace(d, t)
        hom = lambda k: comb(k + d, d) if k >= 0 else 0  # noqa: E731
        assert sp.dims == [hom(k) - hom(k - 2) for k in range(1, t + 1)]
        assert all(v > 0 for v in sp.dims)

    def test_s2(self):
        assert HarmonicSpace(2, 5).dims == [3, 5, 7, 9, 11]
        assert HarmonicSpace(2, 5).total_dim == 35

    def test_limits(self):
        with pytest.raises(ValueError):
            HarmonicSpace(2, 101)
        with pytest.raises(ValueError):
            HarmonicSpace(0, 3)


class TestKernel:
    @given(st.integers(1, 6), st.integers(1, 60))
    def test_trace(self, d, t):
        sp = HarmonicSpace(d, t)
        assert kernel(sp, 1.0).total == pytest.approx(sp.total_dim, rel=1e-12)

    def test_s2_trace_and_degree_one(self):
        for t in range(1, 8):
            assert kernel(HarmonicSpace(2, t), 1.0).total == pytest.approx((t + 1) ** 2 - 1)
        s = np.linspace(-1, 1, 11)
        assert np.allclose(kernel(HarmonicSpace(2, 1), s).total, 3 * s)

    @pytest.mark.parametrize("d,t", [(2, 5), (3, 4), (4, 3), (1, 6)])
    def test_mean_zero(self, d, t):
        sp = HarmonicSpace(d, t)
        if d == 1:
            val = quad(lambda a: kernel(sp, np.cos(a)).total, 0, np.pi)[0]
        else:
            val = quad(lambda s: kernel(sp, s).total * (1 - s * s) ** ((d - 2) / 2), -1, 1)[0]
        assert abs(val) < 1e-10

    def test_per_degree_sum(self):
        kv = kernel(HarmonicSpace(3, 6), np.array([0.1, -0.7]))
        assert kv.per_degree.shape == (6, 2)
        assert np.allclose(kv.per_degree.sum(axis=0), kv.total)

    def test_range_error(self):
        with pytest.raises(ValueError):
            kernel(HarmonicSpace(2, 3), 1.1)

    @pytest.mark.parametrize("d", [2, 3, 5])
    def test_high_degree_against_mpmath(self, d):
        t = 100
        sp = HarmonicSpace(d, t)
        a = mpmath.mpf(d - 1) / 2
        mpmath.mp.dps = 40
        for s in (0.3, -0.87, 0.999):
            ref = mpmath.mpf(0)
            for k, dim in zip(range(1, t + 1), sp.dims):
                if d == 1:
                    ref += dim * mpmath.chebyt(k, s)
                else:
                    ref += dim * mpmath.gegenbauer(k, a, s) / mpmath.gegenbauer(k, a, 1)
            got = kernel(sp, s).total
            assert abs(got - float(ref)) <= 1e-12 * sp.total_dim


class TestDerivatives:
    def test_degree_one(self):
        assert np.allclose(kernel_derivative(HarmonicSpace(2, 1), np.linspace(-1, 1, 5)), 3.0)

    @pytest.mark.parametrize("d,t", [(2, 5), (3, 7), (1, 4), (5, 3)])
    def test_finite_differences(self, d, t):
        sp = HarmonicSpace(d, t)
        s = np.random.default_rng(d).uniform(-0.999, 0.999, 100)
        h = 1e-6
        fd = (kernel(sp, s + h).total - kernel(sp, s - h).total) / (2 * h)
        an = kernel_derivative(sp, s)
        assert np.allclose(an, fd, rtol=1e-7, atol=1e-7 * np.abs(an).max())
        fd2 = (kernel_derivative(sp, s + h) - kernel_derivative(sp, s - h)) / (2 * h)
        an2 = kernel_second_derivative(sp, s)
        assert np.allclose(an2, fd2, rtol=1e-6, atol=1e-6 * np.abs(an2).max())

    @given(st.floats(-1, 1), st.integers(1, 12))
    def test_parity(self, s, t):
        # Z_k(-s) = (-1)^k Z_k(s), so Z_k'(-s) = (-1)^(k+1) Z_k'(s)
        sp = HarmonicSpace(2, t)
        for k in range(1, t + 1):
            pk = HarmonicSpace(2, k)
            zk = kernel_derivative(pk, s) - (kernel_derivative(HarmonicSpace(2, k - 1), s) if k > 1 else 0)
            zk_neg = kernel_derivative(pk, -s) - (kernel_derivative(HarmonicSpace(2, k - 1), -s) if k > 1 else 0)
            assert zk_neg == pytest.approx((-1) ** (k + 1) * zk, abs=1e-9 * (1 + abs(zk)))
        assert np.isfinite(kernel_derivative(sp, s))


class TestQuadrature:
    @pytest.mark.parametrize("d", [1, 2, 3, 4])
    def test_monomials(self, d):
        pts, w = exact_rule(d, 6)
        assert w.sum() == pytest.approx(1.0)
        assert np.allclose(np.linalg.norm(pts, axis=1), 1.0)
        # moments of the uniform measure on S^d
        assert w @ pts[:, 0] ** 2 == pytest.approx(1 / (d + 1))
        assert w @ pts[:, -1] ** 4 == pytest.approx(3 / ((d + 1) * (d + 3)))
        assert w @ (pts[:, 0] ** 2 * pts[:, 1] ** 2) == pytest.approx(1 / ((d + 1) * (d + 3)))
        assert abs(w @ pts[:, 0] ** 3) < 1e-14

    def test_product_rule_sums(self):
        pts, w = sphere_quadrature(5)
        assert len(w) == 50 and w.sum() == pytest.approx(1.0)

    @pytest.mark.parametrize("d", [1, 2, 3])
    def test_feature_gram(self, d):
        sp = HarmonicSpace(d, 5)
        x = geom.mc_sphere_sample(d, 20, d)
        F = kernel_features(sp, x)
        assert np.allclose(F @ F.T, kernel(sp, np.clip(x @ x.T, -1, 1)).total, atol=1e-12)
        per = kernel_features(sp, x, per_degree=True)
        assert np.allclose(per.sum(axis=0), F)

    def test_feature_gradients(self):
        sp = HarmonicSpace(2, 4)
        x = geom.mc_sphere_sample(2, 3, 0)
        D = kernel_feature_gradients(sp, x)
        h = 1e-6
        e = np.eye(3)
        for a in range(3):
            fd = (kernel_features(sp, x + h * e[a]) - kernel_features(sp, x - h * e[a])) / (2 * h)
            assert np.allclose(D[:, :, a], fd, atol=1e-6)


class TestBasis:
    @pytest.mark.parametrize("t", [1, 4, 10])
    def test_orthonormal(self, t):
        pts, w = sphere_quadrature(t + 2)
        Y = basis_values(t, pts)
        assert np.allclose((Y * w[:, None]).T @ Y, np.eye(HarmonicSpace(2, t).total_dim), atol=1e-12)
        assert np.allclose(w @ Y, 0, atol=1e-13)

    def test_degree_one_is_scaled_coordinates(self):
        x = geom.mc_sphere_sample(2, 5, 1)
        Y = basis_values(1, x)
        assert np.allclose(Y, np.sqrt(3) * x[:, [1, 2, 0]])

    def test_addition_theorem(self):
        t = 7
        x, y = geom.mc_sphere_sample(2, 2, 5)
        lhs = basis_values(t, x[None])[0] @ basis_values(t, y[None])[0]
        assert lhs == pytest.approx(kernel(HarmonicSpace(2, t), x @ y).total, abs=1e-12)

    def test_unsupported_dimension(self):
        with pytest.raises(UnsupportedDimensionError):
            Poly(HarmonicSpace(3, 2))
        with pytest.raises(UnsupportedDimensionError):
            random_poly(HarmonicSpace(4, 2), 0)


class TestPoly:
    def test_zero(self):
        P = Poly(HarmonicSpace(2, 3))
        x = geom.mc_sphere_sample(2, 10, 0)
        assert np.all(P(x) == 0)
        assert grad_l1_norm(P) == 0.0
        assert integrate_abs(P) == 0.0

    def test_basis_function_norm(self):
        sp = HarmonicSpace(2, 4)
        P = Poly(sp, np.eye(sp.total_dim)[7])
        assert inner_product(P, P, "quadrature") == pytest.approx(1.0, abs=1e-12)

    @settings(max_examples=100)
    @given(st.integers(0, 10**6), st.integers(1, 10))
    def test_reproducing_property(self, seed, t):
        sp = HarmonicSpace(2, t)
        Q = random_poly(sp, seed)
        x = geom.mc_sphere_sample(2, 1, seed)[0]
        G = Poly.kernel_slice(sp, x)
        assert abs(inner_product(G, Q, "quadrature") - Q(x)) < 1e-10
        assert abs(inner_product(G, Q) - Q(x)) < 1e-10

    @given(st.integers(0, 10**6))
    def test_inner_product_methods_agree(self, seed):
        sp = HarmonicSpace(2, 6)
        P, Q = random_poly(sp, seed), random_poly(sp, seed + 1)
        assert inner_product(P, Q) == pytest.approx(inner_product(P, Q, "quadrature"), abs=1e-10)
        assert inner_product(P, P) == pytest.approx(1.0)

    def test_kernel_slices_inner_product(self):
        sp = HarmonicSpace(2, 5)
        x, y = geom.mc_sphere_sample(2, 2, 9)
        Gx, Gy = Poly.kernel_slice(sp, x), Poly.kernel_slice(sp, y)
        assert inner_product(Gx, Gy) == pytest.approx(kernel(sp, x @ y).total, abs=1e-12)

    def test_space_mismatch(self):
        with pytest.raises(ValueError):
            inner_product(Poly(HarmonicSpace(2, 2)), Poly(HarmonicSpace(2, 3)))

    def test_serialization(self):
        P = random_poly(HarmonicSpace(2, 3), 4)
        data = P.to_dict()
        assert set(data) >= {"d", "t", "coeffs"}
        Q = Poly.from_dict(data)
        assert np.array_equal(Q.coeffs, P.coeffs)

    def test_random_determinism_and_mean(self):
        sp = HarmonicSpace(2, 4)
        assert np.array_equal(random_poly(sp, 3).coeffs, random_poly(sp, 3).coeffs)
        pts, w = exact_quadrature(4)
        assert abs(w @ random_poly(sp, 3)(pts)) < 1e-14


class TestGradient:
    def test_linear(self):
        e = np.array([1.0, -2.0, 0.5])
        e /= np.linalg.norm(e)
        P = 2.5 * linear_poly(e)
        x = geom.mc_sphere_sample(2, 50, 2)
        expect = 2.5 * (e - (x @ e)[:, None] * x)
        assert np.allclose(spherical_gradient(P, x), expect, atol=1e-13)
        assert np.allclose(P(x), 2.5 * x @ e)

    def test_tangency(self):
        P = random_poly(HarmonicSpace(2, 6), 1)
        x = geom.mc_sphere_sample(2, 1000, 3)
        g = spherical_gradient(P, x)
        assert np.abs(np.sum(g * x, axis=1)).max() < 1e-12

    @pytest.mark.parametrize("seed", range(5))
    def test_finite_differences(self, seed):
        P = random_poly(HarmonicSpace(2, 5), seed)
        rng = np.random.default_rng(seed + 1000)
        x = geom.mc_sphere_sample(2, 1, seed)[0]
        g = spherical_gradient(P, x)
        for _ in range(3):
            u = geom.tangent_project(x, rng.normal(size=3))
            u /= np.linalg.norm(u)
            assert tangent_fd(P, x, u) == pytest.approx(g @ u, rel=1e-6, abs=1e-8 * np.linalg.norm(g))


class TestIntegrals:
    @given(st.integers(0, 10**6))
    @settings(max_examples=10)
    def test_linear_abs_and_grad(self, seed):
        e = geom.mc_sphere_sample(2, 1, seed)[0]
        P = linear_poly(e)
        assert integrate_abs(P) == pytest.approx(0.5, abs=1e-6)
        assert grad_l1_norm(P) == pytest.approx(np.pi / 4, rel=1e-6)

    def test_abs_against_dense_grid(self):
        P = random_poly(HarmonicSpace(2, 3), 8)
        pts, w = sphere_quadrature(600)
        assert integrate_abs(P) == pytest.approx(w @ np.abs(P(pts)), rel=1e-6)

    def test_grad_scaling(self):
        P = random_poly(HarmonicSpace(2, 3), 2)
        assert grad_l1_norm(-3.0 * P) == pytest.approx(3.0 * grad_l1_norm(P), rel=1e-12)

    @pytest.mark.parametrize("seed", [0, 1])
    def test_boundary_normalization(self, seed):
        P = random_poly(HarmonicSpace(2, 3), seed, "boundary")
        assert grad_l1_norm(P) == pytest.approx(1.0, abs=1e-6)
        # an independent finer grid agrees with the stopping level
        pts, w = sphere_quadrature(512)
        assert w @ np.linalg.norm(spherical_gradient(P, pts), axis=1) == pytest.approx(1.0, abs=2e-6)
