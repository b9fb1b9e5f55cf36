"""Scikit-learn style wrappers around the functional solvers.

The estimators take the received pilot block in the scikit-learn layout,
``X`` of shape ``(M, L)`` with one row per antenna, and estimate one
fading value per device. ``S`` is a hyperparameter, so ``get_params`` /
``set_params`` / ``clone`` work as usual.
"""

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .embed import select_blocks
from .model import as_sequences, default_noise_var
from .solvers import SolverConfig, coordinate_descent_mle, coordinate_descent_regularized, detect, nnls

SOLVERS = ("mle", "nnls")


def _check_snapshots(X, L):
    X = np.asarray(X)
    if X.ndim != 2:
        raise ValueError(f"X must be 2-D (M, L), got shape {X.shape}")
    if X.shape[1] != L:
        raise ValueError(f"X has {X.shape[1]} columns but the sequences have length {L}")
    if X.shape[0] < 1:
        raise ValueError("X needs at least one antenna (row)")
    X = X.astype(np.complex128, copy=False)
    if not np.all(np.isfinite(X)):
        raise ValueError("X contains NaN or inf")
    return X


class ActivityDetector(BaseEstimator):
    """Device-activity detector from the sample covariance of the pilot block.

    Parameters
    ----------
    S : (L, N) complex array
        Pilot sequences, one column per device.
    noise_var : float, default=None
        Noise variance; ``None`` uses the 10 dB default for unit fading.
    threshold : float, default=0.5
        Devices with estimated fading at or above this value are active.
    solver : {'mle', 'nnls'}, default='mle'
    regularizer : {'none', 'l1', 'log_sum'}, default='none'
        Only used by the ``'mle'`` solver.
    lam, eps : float
        Regularization weight and log-sum offset.
    max_sweeps : int, default=500
    tol : float, default=1e-4
    random_state : int, default=0
        Seed for the coordinate visiting order.

    Attributes
    ----------
    gamma_ : ndarray of shape (N,)
        Estimated fading coefficients.
    support_ : ndarray of int
        Indices of devices declared active.
    n_iter_ : int
        Sweeps used by the solver.
    objective_trace_ : list of float

    Examples
    --------
    >>> import numpy as np
    >>> from covdetect import ActivityDetector, gen_sequences, gen_ground_truth, simulate
    >>> S = gen_sequences("gaussian", 8, 16, seed=0)
    >>> truth = gen_ground_truth(16, 2, seed=1)
    >>> Y = simulate(S, truth, M=256, noise_var=0.8, seed=2)
    >>> det = ActivityDetector(S.entries, noise_var=0.8).fit(Y.T)
    >>> det.gamma_.shape
    (16,)
    """

    def __init__(self, S=None, noise_var=None, threshold=0.5, solver="mle", regularizer="none", lam=0.0, eps=0.1,
                 max_sweeps=500, tol=1e-4, random_state=0):
        self.S = S
        self.noise_var = noise_var
        self.threshold = threshold
        self.solver = solver
        self.regularizer = regularizer
        self.lam = lam
        self.eps = eps
        self.max_sweeps = max_sweeps
        self.tol = tol
        self.random_state = random_state

    def _validate(self):
        if self.S is None:
            raise ValueError("S (the sequence matrix) must be set")
        if self.solver not in SOLVERS:
            raise ValueError(f"solver must be one of {SOLVERS}, got {self.solver!r}")
        if self.threshold < 0:
            raise ValueError("threshold must be >= 0")
        S = as_sequences(self.S)
        noise_var = default_noise_var(S.shape[0]) if self.noise_var is None else float(self.noise_var)
        config = SolverConfig(max_sweeps=self.max_sweeps, tol=self.tol, regularizer=self.regularizer,
                              lam=self.lam, eps=self.eps, seed=self.random_state)
        return S, noise_var, config

    def _estimate(self, X):
        S, noise_var, config = self._validate()
        X = _check_snapshots(X, S.shape[0])
        M = X.shape[0]
        cov = X.T @ X.conj() / M
        cov = 0.5 * (cov + cov.conj().T)
        if self.solver == "nnls":
            return nnls(S, cov, noise_var, config)
        if config.regularizer != "none":
            return coordinate_descent_regularized(S, cov, noise_var, config, M)
        return coordinate_descent_mle(S, cov, noise_var, config)

    def fit(self, X, y=None):
        """Estimate the fading vector from the snapshots ``X`` (M, L)."""
        est = self._estimate(X)
        self.gamma_ = est.gamma_hat
        self.n_iter_ = est.sweeps_used
        self.objective_trace_ = est.objective_trace
        self.support_ = np.flatnonzero(detect(est, self.threshold).active_flags)
        self.n_features_in_ = self.gamma_.shape[0]
        return self

    def decision_function(self, X=None):
        """Estimated fading per device; re-estimates when ``X`` is given."""
        if X is None:
            check_is_fitted(self, "gamma_")
            return self.gamma_
        return self._estimate(X).gamma_hat

    def predict(self, X=None):
        """Boolean activity flag per device."""
        return self.decision_function(X) >= self.threshold

    def fit_predict(self, X, y=None):
        return self.fit(X).predict()

    def score(self, X, y):
        """Fraction of devices classified correctly against the true activity ``y`` (length N)."""
        y = np.asarray(y).astype(bool)
        return float(np.mean(self.predict(X) == y))


class JointActivityDetector(ActivityDetector):
    """Joint activity and data detector for ``Q`` sequences per device.

    ``S`` has ``N * Q`` columns with device ``n`` owning ``[nQ, (n+1)Q)``.
    ``predict`` returns the decoded sequence index per device, ``-1`` for
    devices declared inactive.

    Attributes
    ----------
    gamma_ : ndarray of shape (N * Q,)
    bits_ : ndarray of shape (N,)
    """

    def __init__(self, S=None, Q=2, noise_var=None, threshold=0.5, solver="mle", regularizer="none", lam=0.0,
                 eps=0.1, max_sweeps=500, tol=1e-4, random_state=0):
        super().__init__(S=S, noise_var=noise_var, threshold=threshold, solver=solver, regularizer=regularizer,
                         lam=lam, eps=eps, max_sweeps=max_sweeps, tol=tol, random_state=random_state)
        self.Q = Q

    def _validate(self):
        out = super()._validate()
        if int(self.Q) < 1 or out[0].shape[1] % int(self.Q):
            raise ValueError(f"S has {out[0].shape[1]} columns, not a multiple of Q={self.Q}")
        return out

    def fit(self, X, y=None):
        super().fit(X)
        decision = select_blocks(self.gamma_, int(self.Q), self.threshold)
        self.bits_ = decision.bits
        self.support_ = np.flatnonzero(decision.active)
        return self

    def predict(self, X=None):
        return select_blocks(self.decision_function(X), int(self.Q), self.threshold).bits

    def score(self, X, y):
        """Fraction of devices whose decoded index (``-1`` = inactive) matches ``y``."""
        return float(np.mean(self.predict(X) == np.asarray(y)))
