import numpy as np
import pytest

from covdetect import (
    SystemConfig,
    default_noise_var,
    gen_ground_truth,
    gen_sequences,
    sample_covariance,
    simulate,
    true_covariance,
)


class TestGenSequences:
    def test_sphere_column_norms(self):
        S = gen_sequences("sphere", 4, 10, seed=3).entries
        np.testing.assert_allclose(np.sum(np.abs(S) ** 2, axis=0), 4.0, rtol=1e-12)

    def test_qpsk_alphabet(self):
        S = gen_sequences("qpsk_alphabet", 2, 3, seed=1).entries
        assert S.shape == (2, 3)
        assert set(S.ravel().tolist()) <= {1 + 1j, 1 - 1j, -1 + 1j, -1 - 1j}

    def test_gaussian_power(self):
        S = gen_sequences("gaussian", 100, 100, seed=7).entries
        assert abs(np.mean(np.abs(S) ** 2) - 1.0) < 0.1

    def test_partial_dft_rows_are_dft_rows(self):
        S = gen_sequences("partial_dft", 5, 16, seed=2).entries
        F = np.exp(-2j * np.pi * np.outer(np.arange(16), np.arange(16)) / 16)
        for row in S:
            assert np.any(np.all(np.isclose(F, row), axis=1))

    def test_partial_dft_larger_size(self):
        S = gen_sequences("partial_dft", 4, 6, seed=2, dft_size=32).entries
        np.testing.assert_allclose(np.abs(S), 1.0)
        with pytest.raises(ValueError):
            gen_sequences("partial_dft", 4, 40, seed=2, dft_size=32)

    def test_seed_determinism(self):
        a = gen_sequences("gaussian", 6, 9, seed=11).entries
        b = gen_sequences("gaussian", 6, 9, seed=11).entries
        np.testing.assert_array_equal(a, b)

    @pytest.mark.parametrize("bad", [("nope", 3, 3), ("gaussian", 0, 3), ("gaussian", 3, -1)])
    def test_invalid(self, bad):
        with pytest.raises(ValueError):
            gen_sequences(*bad, seed=0)


class TestGroundTruth:
    def test_empty_support(self):
        gt = gen_ground_truth(5, 0, seed=0)
        np.testing.assert_array_equal(gt.gamma0, 0)
        np.testing.assert_array_equal(gt.inactive_set, np.arange(5))

    def test_full_support(self):
        gt = gen_ground_truth(5, 5, gamma_active=2.5, seed=0)
        np.testing.assert_array_equal(gt.gamma0, 2.5)
        assert gt.inactive_set.size == 0

    def test_sizes(self):
        gt = gen_ground_truth(1000, 50, seed=0)
        assert gt.inactive_set.size == 950 and gt.K == 50
        assert np.union1d(gt.inactive_set, gt.active_set).size == 1000

    def test_k_above_n(self):
        with pytest.raises(ValueError):
            gen_ground_truth(3, 4, seed=0)


class TestCovariance:
    def test_zero_gamma(self):
        S = gen_sequences("gaussian", 3, 5, seed=0)
        np.testing.assert_allclose(true_covariance(S, np.zeros(5), 0.7).sigma, 0.7 * np.eye(3))

    def test_rank_one(self):
        sigma = true_covariance(np.array([[1.0], [0.0]]), [2.0], 1.0).sigma
        np.testing.assert_allclose(sigma, [[3, 0], [0, 1]])

    def test_sample_covariance_matches_truth(self):
        S = gen_sequences("gaussian", 3, 4, seed=5).entries
        gamma = np.array([1.0, 0.0, 0.5, 2.0])
        M = 100_000
        Y = simulate(S, gamma, M, 0.3, seed=9)
        est = sample_covariance(Y).sigma
        truth = true_covariance(S, gamma, 0.3).sigma
        # Var of y_i conj(y_j) for complex Gaussian is Sigma_ii Sigma_jj
        se = np.sqrt(np.outer(np.diag(truth).real, np.diag(truth).real) / M)
        assert np.all(np.abs(est - truth) <= 3 * se * np.sqrt(2))

    def test_noise_free_inactive(self):
        Y = simulate(np.ones((2, 3)), np.zeros(3), 8, 1e-12, seed=0)
        assert np.linalg.norm(Y) < 1e-4

    def test_simulate_determinism(self):
        S = gen_sequences("gaussian", 4, 6, seed=0)
        gt = gen_ground_truth(6, 2, seed=1)
        np.testing.assert_array_equal(simulate(S, gt, 10, 0.5, seed=3), simulate(S, gt, 10, 0.5, seed=3))

    def test_sample_covariance_small(self):
        np.testing.assert_allclose(sample_covariance(np.zeros((2, 3))).sigma, 0)
        np.testing.assert_allclose(sample_covariance(np.array([[1, 1j, -1, -1j]])).sigma, [[1.0]])

    def test_trace_identity(self, rng):
        Y = rng.standard_normal((5, 7)) + 1j * rng.standard_normal((5, 7))
        cov = sample_covariance(Y).sigma
        assert np.isclose(np.trace(cov).real, np.linalg.norm(Y) ** 2 / 7, rtol=1e-12)


def test_system_config_default_noise():
    cfg = SystemConfig(N=100, K=10, L=20, M=64)
    assert cfg.noise_var == pytest.approx(default_noise_var(20)) == pytest.approx(2.0)
    with pytest.raises(ValueError):
        SystemConfig(N=10, K=11, L=4, M=8)
