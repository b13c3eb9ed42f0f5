import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bayesdd.basis import data_orthonormal_design
from bayesdd.ebayes import (
    CoefficientStats,
    GammaPriorSchedule,
    deaton_fit,
    gaussian_means_bayes,
    induced_prior_variances,
    james_stein_style_mean,
    joint_hyper_grad,
    joint_hyper_loglik,
    pava,
    shrinkage_posterior_means,
    unconstrained_v_map,
)
from bayesdd.linmodel import DegreesOfFreedomError, GaussianLinearModel, posterior
from oracles import isotonic_bruteforce, maxmin_isotonic


def random_stats(rng, p1=None):
    p1 = int(rng.integers(1, 6)) if p1 is None else p1
    n = p1 + int(rng.integers(1, 15))
    return CoefficientStats(rng.normal(0, 2, p1), float(rng.uniform(0.1, 5)), n - p1, n)


def orthonormal_problem(rng, n=20, degree=5):
    x = np.sort(rng.uniform(-1, 1, n))
    d = data_orthonormal_design(x, degree)
    y = np.cos(3 * x) + 0.5 * x**3 + 0.3 * rng.standard_normal(n)
    return d, y


class TestCoefficientStats:
    def test_from_design(self):
        d, y = orthonormal_problem(np.random.default_rng(0))
        st_ = CoefficientStats.from_design(d, y)
        np.testing.assert_allclose(st_.theta_hat, d.matrix.T @ y, atol=1e-12)
        assert st_.d == 14 and st_.n == 20
        assert st_.s == pytest.approx(float(np.sum((y - d.matrix @ st_.theta_hat) ** 2)), rel=1e-10)

    def test_inconsistent_d(self):
        with pytest.raises(ValueError):
            CoefficientStats(np.zeros(3), 1.0, 5, 7)
        with pytest.raises(ValueError):
            CoefficientStats(np.zeros(3), -1.0, 4, 7)


class TestJointLoglik:
    def test_z_one_is_noise_density(self):
        st_a = CoefficientStats(np.array([0.7]), 2.0, 5, 6)
        st_b = CoefficientStats(np.array([-1.9]), 2.0, 5, 6)
        s2 = 0.8
        diff = joint_hyper_loglik(st_a, [1.0], s2) - joint_hyper_loglik(st_b, [1.0], s2)
        def logn(t):
            return -0.5 * math.log(2 * math.pi * s2) - t**2 / (2 * s2)
        assert diff == pytest.approx(logn(0.7) - logn(-1.9), abs=1e-12)

    def test_interior_maximizer(self):
        theta, s2 = 2.0, 1.0
        st_ = CoefficientStats(np.array([theta]), 3.0, 4, 5)
        grid = np.linspace(1e-3, 1.0, 100_000)
        vals = [joint_hyper_loglik(st_, [z], s2) for z in grid[::100]]
        zbest = grid[::100][int(np.argmax(vals))]
        assert abs(zbest - s2 / theta**2) < 2e-3

    def test_gradient_matches_central_differences(self):
        rng = np.random.default_rng(1)
        worst = 0.0
        for _ in range(100):
            st_ = random_stats(rng)
            z = rng.uniform(0.05, 0.95, st_.theta_hat.shape)
            s2 = float(rng.uniform(0.3, 3.0))
            gz, gs = joint_hyper_grad(st_, z, s2)
            h = 1e-6
            for i in range(z.shape[0]):
                e = np.zeros_like(z)
                e[i] = h
                fd = (joint_hyper_loglik(st_, z + e, s2) - joint_hyper_loglik(st_, z - e, s2)) / (2 * h)
                worst = max(worst, abs(fd - gz[i]))
            fd = (joint_hyper_loglik(st_, z, s2 + h) - joint_hyper_loglik(st_, z, s2 - h)) / (2 * h)
            worst = max(worst, abs(fd - gs))
        assert worst < 1e-6

    @pytest.mark.parametrize("z,s2", [([0.0], 1.0), ([1.5], 1.0), ([0.5], 0.0), ([0.5], -1.0)])
    def test_domain(self, z, s2):
        with pytest.raises(ValueError):
            joint_hyper_loglik(CoefficientStats(np.array([1.0]), 1.0, 3, 4), z, s2)

    def test_needs_residual_degrees_of_freedom(self):
        with pytest.raises(DegreesOfFreedomError):
            joint_hyper_loglik(CoefficientStats(np.array([1.0]), 0.0, 0, 1), [0.5], 1.0)


class TestVMap:
    def test_zero_signal_is_prior_value(self):
        sched = GammaPriorSchedule(np.array([1.5, 2.0]), np.array([4.0, 4.0]))
        v = unconstrained_v_map(CoefficientStats(np.array([0.0]), 1.0, 3, 4), sched)
        assert v[0] == pytest.approx((1.5 - 0.5) * 4.0)

    def test_large_signal_goes_to_zero(self):
        sched = GammaPriorSchedule.default(1)
        vs = [unconstrained_v_map(CoefficientStats(np.array([t]), 1.0, 3, 4), sched)[0] for t in (1, 10, 1e3)]
        assert vs[0] > vs[1] > vs[2] > 0 and vs[2] < 1e-5

    def test_grid_search_oracle(self):
        rng = np.random.default_rng(2)
        grid = np.arange(1, 500_001) * 1e-4
        logg = np.log(grid)
        for _ in range(10):
            st_ = random_stats(rng, p1=3)
            st_ = CoefficientStats(st_.theta_hat + np.sign(st_.theta_hat) * 0.5, st_.s, st_.d, st_.n)
            sched = GammaPriorSchedule(rng.uniform(0.8, 3.0, 4), rng.uniform(0.5, 5.0, 4))
            v = unconstrained_v_map(st_, sched)
            g, b = sched.shapes, sched.scales
            for i in range(4):
                if i < 3:
                    obj = (g[i] - 1 + 0.5) * logg - grid / b[i] - st_.theta_hat[i] ** 2 * grid / 2
                else:
                    obj = (g[i] - 1 + st_.d / 2) * logg - grid / b[i] - st_.s * grid / 2
                assert v[i] < 50
                assert abs(grid[np.argmax(obj)] - v[i]) <= 1e-4

    def test_schedule_validation(self):
        with pytest.raises(ValueError):
            GammaPriorSchedule(np.array([0.5, 1.0]), np.array([1.0, 1.0]))
        with pytest.raises(ValueError):
            GammaPriorSchedule(np.array([1.0, 1.0]), np.array([1.0, 0.0]))
        with pytest.raises(ValueError):
            unconstrained_v_map(CoefficientStats(np.zeros(2), 1.0, 3, 5), GammaPriorSchedule.default(3))


class TestPava:
    def test_already_sorted(self):
        x = np.array([-1.0, 0.0, 0.0, 2.5])
        fit, blocks = pava(x)
        np.testing.assert_array_equal(fit, x)
        assert blocks == [(0, 0), (1, 1), (2, 2), (3, 3)]

    def test_two_points(self):
        fit, blocks = pava([2.0, 1.0], [1.0, 1.0])
        np.testing.assert_array_equal(fit, [1.5, 1.5])
        assert blocks == [(0, 1)]

    def test_three_points(self):
        np.testing.assert_allclose(pava([3.0, 1.0, 2.0])[0], [2.0, 2.0, 2.0])

    def test_weighted(self):
        np.testing.assert_allclose(pava([2.0, 1.0], [3.0, 1.0])[0], [1.75, 1.75])

    def test_errors(self):
        with pytest.raises(ValueError):
            pava([1.0, 2.0], [1.0])
        with pytest.raises(ValueError):
            pava([1.0, 2.0], [1.0, 0.0])

    def test_bruteforce_oracle(self):
        rng = np.random.default_rng(3)
        for _ in range(300):
            n = int(rng.integers(1, 7))
            y = rng.normal(0, 1, n)
            w = rng.uniform(0.1, 3.0, n)
            np.testing.assert_allclose(pava(y, w)[0], isotonic_bruteforce(y, w), atol=1e-10)

    @settings(max_examples=200, deadline=None)
    @given(st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=8),
           st.lists(st.floats(0.01, 100), min_size=8, max_size=8))
    def test_properties(self, y, w):
        y = np.array(y)
        w = np.array(w[: len(y)])
        fit, blocks = pava(y, w)
        assert np.all(np.diff(fit) >= -1e-9)
        np.testing.assert_allclose(pava(fit, w)[0], fit, atol=1e-9)
        assert np.sum(w * fit) == pytest.approx(np.sum(w * y), rel=1e-9, abs=1e-6)
        np.testing.assert_allclose(fit, maxmin_isotonic(y, w), rtol=1e-9, atol=1e-7)
        for s, e in blocks:
            avg = np.sum(w[s:e + 1] * y[s:e + 1]) / np.sum(w[s:e + 1])
            np.testing.assert_allclose(fit[s:e + 1], avg, rtol=1e-9, atol=1e-7)


class TestDeatonFit:
    def test_invariants_random(self):
        rng = np.random.default_rng(4)
        for _ in range(200):
            st_ = random_stats(rng)
            for w in ("unit", "precision"):
                fit = deaton_fit(st_, weights=w)
                assert np.all((fit.z > 0) & (fit.z <= 1))
                assert np.all(np.diff(fit.z) >= -1e-15)
                assert np.all(np.diff(fit.v_isotonic) >= -1e-12)
                assert fit.sigma2_hat > 0
                assert fit.sigma2_hat == pytest.approx(1 / fit.v_isotonic[-1])

    def test_zero_coefficients(self):
        fit = deaton_fit(CoefficientStats(np.zeros(4), 2.0, 6, 10),
                         GammaPriorSchedule(np.full(5, 2.0), np.full(5, 1.0)))
        assert np.all(fit.z == fit.z[0])

    def test_ordered_input_is_identity(self):
        st_ = CoefficientStats(np.array([100.0, 10.0, 1.0, 0.1]), 0.01, 16, 20)
        fit = deaton_fit(st_)
        np.testing.assert_array_equal(fit.v_isotonic, fit.v_unconstrained)
        assert fit.pool_blocks == [(i, i) for i in range(5)]

    def test_one_inversion_matches_oracle(self):
        st_ = CoefficientStats(np.array([100.0, 0.1, 10.0, 0.05]), 0.5, 16, 20)
        for w in ("unit", "precision"):
            fit = deaton_fit(st_, weights=w)
            assert len(fit.pool_blocks) < 5
            from bayesdd.ebayes import v_curvature

            wts = (np.ones(5) if w == "unit"
                   else v_curvature(st_, GammaPriorSchedule.default(4), fit.v_unconstrained))
            np.testing.assert_allclose(fit.v_isotonic, isotonic_bruteforce(fit.v_unconstrained, wts),
                                       atol=1e-10)

    def test_needs_residual_degrees_of_freedom(self):
        with pytest.raises(DegreesOfFreedomError):
            deaton_fit(CoefficientStats(np.ones(3), 0.0, 0, 3))

    def test_unknown_weights(self):
        with pytest.raises(ValueError):
            deaton_fit(CoefficientStats(np.ones(3), 1.0, 2, 5), weights="other")


class TestShrinkage:
    def test_limits(self):
        from bayesdd.ebayes import PavaFit

        st_ = CoefficientStats(np.array([3.0, -2.0]), 1.0, 3, 5)
        fit = PavaFit(np.ones(3), np.ones(3), np.array([1e-12, 1.0]), 1.0, [])
        out = shrinkage_posterior_means(st_, fit)
        assert out[0] == pytest.approx(3.0) and out[1] == 0.0

    def test_matches_conjugate_posterior(self):
        rng = np.random.default_rng(5)
        for _ in range(25):
            d, y = orthonormal_problem(rng, n=int(rng.integers(8, 30)), degree=int(rng.integers(1, 6)))
            st_ = CoefficientStats.from_design(d, y)
            fit = deaton_fit(st_)
            m = GaussianLinearModel(d, induced_prior_variances(fit), fit.sigma2_hat)
            np.testing.assert_allclose(shrinkage_posterior_means(st_, fit), posterior(m, y).mean, atol=1e-10)


class TestGaussianMeans:
    def test_closed_forms(self):
        y = np.array([1.0, -2.0, 4.0])
        means, risk = gaussian_means_bayes(y, 2.0, 2.0)
        np.testing.assert_allclose(means, y / 2)
        np.testing.assert_allclose(risk, 1.0)
        means, risk = gaussian_means_bayes(y, 1e12, 2.0)
        np.testing.assert_allclose(means, y, rtol=1e-11)
        np.testing.assert_allclose(risk, 2.0, rtol=1e-11)

    def test_heterogeneous(self):
        means, risk = gaussian_means_bayes([1.0, 1.0], [1.0, 3.0], 1.0)
        np.testing.assert_allclose(means, [0.5, 0.75])
        np.testing.assert_allclose(risk, [0.5, 0.75])

    def test_monte_carlo_risk_and_dominance(self):
        rng = np.random.default_rng(6)
        tau2, s2 = 1.5, 0.7
        theta = rng.normal(0, math.sqrt(tau2), 100_000)
        y = theta + rng.normal(0, math.sqrt(s2), theta.shape)
        means, risk = gaussian_means_bayes(y, tau2, s2)
        emp = float(np.mean((means - theta) ** 2))
        assert abs(emp / risk[0] - 1) < 0.02
        assert emp <= float(np.mean((y - theta) ** 2))

    def test_validation(self):
        with pytest.raises(ValueError):
            gaussian_means_bayes([1.0], 0.0, 1.0)


class TestJamesStein:
    def test_plug_in(self):
        assert james_stein_style_mean(2.0, 4, 0.0, 1.0, 4.0) == pytest.approx(1.0)

    def test_limits(self):
        assert james_stein_style_mean(2.0, 3, 5.0, 1e15, 1.0) == pytest.approx(2.0)
        assert james_stein_style_mean(2.0, 3, 5.0, 1.0, 1e-15) == pytest.approx(2.0)

    def test_validation(self):
        with pytest.raises(ValueError):
            james_stein_style_mean(1.0, 0, 0.0, 1.0, 1.0)
