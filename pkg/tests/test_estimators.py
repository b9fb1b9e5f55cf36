import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from covdetect import (
    ActivityDetector,
    JointActivityDetector,
    SolverConfig,
    coordinate_descent_mle,
    gen_embed_ground_truth,
    gen_ground_truth,
    gen_sequences,
    lift_sequences,
    sample_covariance,
    simulate,
)


@pytest.fixture
def problem():
    S = gen_sequences("gaussian", 10, 40, seed=0).entries
    truth = gen_ground_truth(40, 4, seed=1)
    Y = simulate(S, truth, 512, 1.0, seed=2)
    return S, truth, Y


def test_matches_functional(problem):
    S, _, Y = problem
    det = ActivityDetector(S, noise_var=1.0).fit(Y.T)
    est = coordinate_descent_mle(S, sample_covariance(Y), 1.0, SolverConfig())
    np.testing.assert_allclose(det.gamma_, est.gamma_hat, atol=1e-12)
    assert det.n_iter_ == est.sweeps_used


@pytest.mark.parametrize("solver,reg", [("mle", "none"), ("nnls", "none"), ("mle", "l1"), ("mle", "log_sum")])
def test_recovers_support(problem, solver, reg):
    S, truth, Y = problem
    det = ActivityDetector(S, noise_var=1.0, solver=solver, regularizer=reg, lam=1.0).fit(Y.T)
    np.testing.assert_array_equal(det.support_, truth.active_set)
    assert det.score(None, truth.gamma0 > 0) == 1.0


def test_params_roundtrip(problem):
    S, _, _ = problem
    det = ActivityDetector(S, threshold=0.3, solver="nnls")
    params = clone(det).get_params()
    assert params["threshold"] == 0.3 and params["solver"] == "nnls"
    assert det.set_params(threshold=0.7).threshold == 0.7


def test_not_fitted(problem):
    with pytest.raises(NotFittedError):
        ActivityDetector(problem[0]).predict()


@pytest.mark.parametrize("X", [np.zeros((5, 3)), np.zeros(10), np.full((5, 10), np.nan)])
def test_bad_input(problem, X):
    with pytest.raises(ValueError):
        ActivityDetector(problem[0]).fit(X)


def test_bad_solver(problem):
    S, _, Y = problem
    with pytest.raises(ValueError):
        ActivityDetector(S, solver="lasso").fit(Y.T)


def test_joint_detector():
    S = lift_sequences("gaussian", 12, 30, 2, seed=3).entries
    truth = gen_embed_ground_truth(30, 3, 2, seed=4)
    Y = simulate(S, truth.gamma_tilde, 1024, 1.0, seed=5)
    det = JointActivityDetector(S, Q=2, noise_var=1.0).fit(Y.T)
    np.testing.assert_array_equal(det.bits_, truth.symbols)
    assert det.score(None, truth.symbols) == 1.0
    with pytest.raises(ValueError):
        JointActivityDetector(S, Q=7).fit(Y.T)
