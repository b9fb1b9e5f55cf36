import numpy as np
import pytest
from scipy.optimize import minimize

from covdetect import (
    SolverConfig,
    coordinate_descent_mle,
    coordinate_descent_regularized,
    detect,
    gen_sequences,
    mle_gradient,
    mle_objective,
    nnls,
    sample_covariance,
    simulate,
    true_covariance,
)
from covdetect.solvers import _log_sum_step, nnls_objective

from conftest import random_cov, random_instance


def dense_objective(S, gamma, cov, noise_var):
    sigma = S @ np.diag(gamma) @ S.conj().T + noise_var * np.eye(S.shape[0])
    return np.linalg.slogdet(sigma)[1] + np.trace(np.linalg.inv(sigma) @ cov).real


class TestObjective:
    def test_noise_only(self):
        S = gen_sequences("gaussian", 4, 6, seed=0)
        val = mle_objective(S, np.zeros(6), 0.5 * np.eye(4), 0.5)
        assert val == pytest.approx(4 * np.log(0.5) + 4)

    def test_scalar(self):
        val = mle_objective(np.ones((1, 1)), [1.3], [[2.0]], 0.2)
        assert val == pytest.approx(np.log(1.5) + 2.0 / 1.5)

    def test_dense_oracle(self, rng):
        S, _ = random_instance(6, 15, 3, seed=1)
        gamma = rng.uniform(0, 2, 15)
        cov = random_cov(rng, 6)
        assert mle_objective(S, gamma, cov, 0.4) == pytest.approx(dense_objective(S, gamma, cov, 0.4), rel=1e-10)

    def test_gradient_zero_at_truth(self, rng):
        S, truth = random_instance(5, 12, 3, seed=2)
        cov = true_covariance(S, truth.gamma0, 0.3)
        np.testing.assert_allclose(mle_gradient(S, truth.gamma0, cov, 0.3), 0, atol=1e-10)

    def test_gradient_scalar(self):
        g = mle_gradient(np.ones((1, 1)), [0.7], [[2.0]], 0.3)
        assert g[0] == pytest.approx(1 / 1.0 - 2.0 / 1.0**2)

    def test_gradient_finite_difference(self, rng):
        S, _ = random_instance(5, 8, 2, seed=3)
        gamma = rng.uniform(0.2, 1.5, 8)
        cov = random_cov(rng, 5)
        grad = mle_gradient(S, gamma, cov, 0.5)
        h = 1e-5
        for i in range(8):
            e = np.zeros(8)
            e[i] = h
            fd = (mle_objective(S, gamma + e, cov, 0.5) - mle_objective(S, gamma - e, cov, 0.5)) / (2 * h)
            assert abs(fd - grad[i]) <= 1e-5 * max(1.0, abs(grad[i]))


class TestCoordinateDescent:
    def test_scalar_closed_form(self):
        for v in (0.1, 2.5):
            est = coordinate_descent_mle(np.ones((1, 1)), [[v]], 0.5, SolverConfig(max_sweeps=1))
            assert est.gamma_hat[0] == pytest.approx(max(v - 0.5, 0.0))

    def test_recovers_truth_from_true_covariance(self):
        S, truth = random_instance(8, 16, 4, seed=4)
        cov = true_covariance(S, truth.gamma0, 0.8)
        est = coordinate_descent_mle(S, cov, 0.8, SolverConfig(tol=1e-12, max_sweeps=2000))
        np.testing.assert_array_equal(np.flatnonzero(est.gamma_hat > 0.5), truth.active_set)
        assert np.max(np.abs(est.gamma_hat - truth.gamma0)) <= 1e-4

    def test_trace_monotone(self):
        S, truth = random_instance(6, 30, 5, seed=5)
        cov = sample_covariance(simulate(S, truth, 32, 0.6, seed=1))
        est = coordinate_descent_mle(S, cov, 0.6)
        trace = np.array(est.objective_trace)
        assert trace.size == est.sweeps_used + 1
        assert np.all(np.diff(trace) <= 1e-9)
        assert np.all(est.gamma_hat >= 0)

    def test_stationarity(self):
        S, truth = random_instance(6, 20, 4, seed=6)
        cov = sample_covariance(simulate(S, truth, 64, 0.6, seed=2))
        est = coordinate_descent_mle(S, cov, 0.6, SolverConfig(tol=1e-13, max_sweeps=5000))
        g = mle_gradient(S, est.gamma_hat, cov, 0.6)
        pos = est.gamma_hat > 1e-8
        assert np.max(np.abs(g[pos])) < 1e-4
        assert np.min(g[~pos]) > -1e-4

    def test_matches_generic_optimizer(self):
        S, truth = random_instance(4, 6, 2, seed=8)
        cov = sample_covariance(simulate(S, truth, 40, 0.5, seed=3)).sigma
        est = coordinate_descent_mle(S, cov, 0.5, SolverConfig(tol=1e-14, max_sweeps=5000))
        ref = minimize(
            lambda g: dense_objective(S, g, cov, 0.5),
            np.full(6, 0.5),
            jac=lambda g: mle_gradient(S, g, cov, 0.5),
            bounds=[(0, None)] * 6,
            method="L-BFGS-B",
            options={"ftol": 1e-15, "gtol": 1e-12},
        )
        assert est.objective_trace[-1] <= ref.fun + 1e-8

    def test_seed_determinism(self):
        S, truth = random_instance(6, 20, 4, seed=9)
        cov = sample_covariance(simulate(S, truth, 16, 0.6, seed=2))
        a = coordinate_descent_mle(S, cov, 0.6, SolverConfig(seed=4))
        b = coordinate_descent_mle(S, cov, 0.6, SolverConfig(seed=4))
        np.testing.assert_array_equal(a.gamma_hat, b.gamma_hat)

    def test_callback_and_refresh(self):
        S, truth = random_instance(6, 20, 4, seed=9)
        cov = sample_covariance(simulate(S, truth, 16, 0.6, seed=2))
        calls = []
        est = coordinate_descent_mle(S, cov, 0.6, SolverConfig(refresh_every=1, tol=1e-8),
                                     callback=lambda g, n: calls.append(n))
        assert calls and est.diagnostics["refactorizations"] >= est.sweeps_used


class TestRegularized:
    def setup_method(self):
        self.S, truth = random_instance(6, 24, 4, seed=10)
        self.cov = sample_covariance(simulate(self.S, truth, 32, 0.6, seed=5))

    def test_zero_lambda_identical(self):
        base = coordinate_descent_mle(self.S, self.cov, 0.6, SolverConfig(seed=3))
        for reg in ("l1", "log_sum"):
            est = coordinate_descent_regularized(self.S, self.cov, 0.6, SolverConfig(seed=3, regularizer=reg), 32)
            np.testing.assert_allclose(est.gamma_hat, base.gamma_hat, atol=1e-10)

    def test_l1_huge_lambda(self):
        est = coordinate_descent_regularized(self.S, self.cov, 0.6, SolverConfig(regularizer="l1", lam=1e9), 32)
        np.testing.assert_array_equal(est.gamma_hat, 0)

    @pytest.mark.parametrize("reg", ["l1", "log_sum"])
    def test_monotone(self, reg):
        est = coordinate_descent_regularized(self.S, self.cov, 0.6, SolverConfig(regularizer=reg, lam=2.0), 32)
        assert np.all(np.diff(est.objective_trace) <= 1e-9)

    def test_l1_shrinks(self):
        base = coordinate_descent_mle(self.S, self.cov, 0.6)
        est = coordinate_descent_regularized(self.S, self.cov, 0.6, SolverConfig(regularizer="l1", lam=5.0), 32)
        assert est.gamma_hat.sum() < base.gamma_hat.sum()

    def test_needs_regularizer(self):
        with pytest.raises(ValueError):
            coordinate_descent_regularized(self.S, self.cov, 0.6, SolverConfig(), 32)

    @pytest.mark.parametrize("seed", range(20))
    def test_log_sum_step_is_global_minimizer(self, seed):
        rng = np.random.default_rng(seed)
        # a = s^H Sigma^{-1} s < 1/g whenever g is already part of Sigma
        a, c = rng.uniform(0.1, 3), rng.uniform(0, 3)
        g = rng.choice([0.0, rng.uniform(0, 0.999 / a)])
        lam, eps = rng.uniform(0, 5), rng.uniform(0.01, 1)

        def psi(d):
            return np.log1p(d * a) - c * d / (1 + d * a) + lam * np.log(eps + g + d)

        delta = _log_sum_step(a, c, g, lam, eps)
        grid = np.linspace(-g, -g + 50, 200_001)
        assert psi(delta) <= psi(grid).min() + 1e-9


class TestNNLS:
    def test_noise_only(self):
        S = gen_sequences("gaussian", 4, 6, seed=0)
        est = nnls(S, 0.5 * np.eye(4), 0.5)
        np.testing.assert_array_equal(est.gamma_hat, 0)

    def test_recovers_truth(self):
        S, truth = random_instance(8, 16, 4, seed=11)
        cov = true_covariance(S, truth.gamma0, 0.8)
        est = nnls(S, cov, 0.8, SolverConfig(tol=1e-20, max_sweeps=20000))
        assert np.max(np.abs(est.gamma_hat - truth.gamma0)) <= 1e-6

    def test_matches_projected_gradient(self):
        S, truth = random_instance(5, 12, 3, seed=12)
        cov = sample_covariance(simulate(S, truth, 20, 0.5, seed=1)).sigma
        est = nnls(S, cov, 0.5, SolverConfig(tol=1e-20, max_sweeps=20000))
        # projected gradient on the real least-squares form
        A = np.abs(S.conj().T @ S) ** 2
        b = np.real(np.einsum("ln,lk,kn->n", S.conj(), cov - 0.5 * np.eye(5), S))
        step = 1.0 / np.linalg.eigvalsh(A)[-1]
        g = np.zeros(12)
        for _ in range(200_000):
            g = np.maximum(g - step * (A @ g - b), 0)
        assert nnls_objective(S, est.gamma_hat, cov, 0.5) <= nnls_objective(S, g, cov, 0.5) + 1e-9
        np.testing.assert_allclose(est.gamma_hat, g, atol=1e-5)


class TestDetect:
    def test_thresholds(self):
        gamma = np.array([0.0, 0.2, 1.0])
        assert detect(gamma, 0).active_flags.all()
        assert not detect(gamma, 1.1).active_flags.any()

    def test_monotone_counts(self):
        gamma = np.random.default_rng(0).exponential(size=50)
        counts = [detect(gamma, t).active_flags.sum() for t in np.linspace(0, gamma.max(), 30)]
        assert np.all(np.diff(counts) <= 0)

    def test_negative_threshold(self):
        with pytest.raises(ValueError):
            detect(np.ones(3), -1)


def test_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(regularizer="l2")
    with pytest.raises(ValueError):
        SolverConfig(tol=0)
