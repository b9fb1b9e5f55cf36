"""Estimators of the large-scale fading vector from a covariance matrix.

All coordinate-descent variants keep the inverse covariance up to date with
rank-one (Sherman-Morrison) corrections, so one coordinate update costs
O(L^2) and a sweep over all devices O(N L^2).
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from ._rng import make_rng
from ._validation import check_gamma, check_positive
from .exceptions import NumericalError
from .model import as_covariance, as_sequences

REGULARIZERS = ("none", "l1", "log_sum")


@dataclass
class SolverConfig:
    """Stopping rule and regularization for the coordinate-descent solvers.

    ``tol`` is compared with the decrease of the objective over one full
    sweep. ``refresh_every`` bounds round-off drift of the tracked inverse by
    refactorizing from scratch periodically.
    """

    max_sweeps: int = 500
    tol: float = 1e-4
    regularizer: str = "none"
    lam: float = 0.0
    eps: float = 0.1
    seed: object = 0
    refresh_every: int = 50
    consistency_tol: float = 1e-6

    def __post_init__(self):
        check_positive(self.max_sweeps, "max_sweeps", integer=True)
        check_positive(self.tol, "tol")
        check_positive(self.lam, "lam", allow_zero=True)
        check_positive(self.eps, "eps")
        check_positive(self.refresh_every, "refresh_every", integer=True)
        if self.regularizer not in REGULARIZERS:
            raise ValueError(f"regularizer must be one of {REGULARIZERS}, got {self.regularizer!r}")


@dataclass
class Estimate:
    """Output of a solver.

    ``objective_trace[0]`` is the objective at the all-zero start and
    ``objective_trace[k]`` the value after sweep ``k``.
    """

    gamma_hat: np.ndarray
    objective_trace: list
    sweeps_used: int
    converged: bool = False
    diagnostics: dict = field(default_factory=dict)


@dataclass
class Detection:
    active_flags: np.ndarray
    threshold: float


def _cho(sigma):
    try:
        return linalg.cho_factor(sigma, lower=True, check_finite=False)
    except linalg.LinAlgError as exc:
        raise NumericalError("covariance is not positive definite") from exc


def _model_cov(S, gamma, noise_var):
    sigma = (S * gamma) @ S.conj().T
    sigma = 0.5 * (sigma + sigma.conj().T)
    sigma[np.diag_indices(S.shape[0])] += noise_var
    return sigma


def _objective_from_cov(sigma, cov):
    factor = _cho(sigma)
    logdet = 2.0 * np.sum(np.log(np.diag(factor[0]).real))
    trace = np.trace(linalg.cho_solve(factor, cov, check_finite=False)).real
    return float(logdet + trace)


def mle_objective(S, gamma, cov_sample, noise_var):
    """Negative log-likelihood per antenna, up to a constant.

    Returns ``log det(Sigma) + tr(Sigma^{-1} cov_sample)`` where
    ``Sigma = S diag(gamma) S^H + noise_var I``, evaluated through a Cholesky
    factorization of ``Sigma``.
    """
    S = as_sequences(S)
    L, N = S.shape
    gamma = check_gamma(gamma, N)
    cov = as_covariance(cov_sample, L)
    check_positive(noise_var, "noise_var")
    return _objective_from_cov(_model_cov(S, gamma, noise_var), cov)


def mle_gradient(S, gamma, cov_sample, noise_var):
    """Gradient of :func:`mle_objective` with respect to ``gamma``.

    Entry ``i`` is ``s_i^H Sigma^{-1} s_i - s_i^H Sigma^{-1} cov Sigma^{-1} s_i``.
    """
    S = as_sequences(S)
    L, N = S.shape
    gamma = check_gamma(gamma, N)
    cov = as_covariance(cov_sample, L)
    check_positive(noise_var, "noise_var")
    Q = linalg.cho_solve(_cho(_model_cov(S, gamma, noise_var)), S, check_finite=False)
    a = np.einsum("ln,ln->n", S.conj(), Q).real
    c = np.einsum("ln,ln->n", Q.conj(), cov @ Q).real
    return a - c


def penalty(gamma, config, M):
    """Regularization term ``R(gamma) / M``."""
    if config.regularizer == "none" or config.lam == 0:
        return 0.0
    if config.regularizer == "l1":
        return config.lam * float(np.sum(gamma)) / M
    return config.lam * float(np.sum(np.log(config.eps + gamma))) / M


def _mle_step(a, c, g):
    return max((c - a) / (a * a), -g)


def _l1_step(a, c, g, lam):
    # positive root of lam*u^2 + a*u - c = 0 with u = 1 + delta*a
    u = 2.0 * c / (a + math.sqrt(a * a + 4.0 * lam * c)) if c > 0 else 0.0
    return max((u - 1.0) / a, -g)


def _log_sum_step(a, c, g, lam, eps):
    """Exact minimizer of the log-sum regularized 1-D restriction.

    In ``u = 1 + delta*a`` the stationarity condition is the quadratic
    ``a(1+lam) u^2 + (a*beta - c) u - c*beta = 0`` with
    ``beta = a(eps + g) - 1``; every real root above the boundary and the
    boundary itself are compared by objective value.
    """
    u_min = 1.0 - a * g
    beta = a * (eps + g) - 1.0
    qa = a * (1.0 + lam)
    qb = a * beta - c
    qc = -c * beta
    candidates = [u_min]
    disc = qb * qb - 4.0 * qa * qc
    if disc >= 0:
        root = math.sqrt(disc)
        for u in ((-qb + root) / (2.0 * qa), (-qb - root) / (2.0 * qa)):
            if u > u_min:
                candidates.append(u)

    def value(u):
        # u -> 0+ sends the objective to +inf; only reachable through round-off
        if u <= 0.0:
            return math.inf
        delta = (u - 1.0) / a
        return math.log(u) - delta * c / u + lam * math.log(eps + g + delta)

    best = min(candidates, key=value)
    return max((best - 1.0) / a, -g)


def _make_step(config, M):
    if config.regularizer == "none" or config.lam == 0:
        return _mle_step
    lam = config.lam / M
    if config.regularizer == "l1":
        return lambda a, c, g: _l1_step(a, c, g, lam)
    eps = config.eps
    return lambda a, c, g: _log_sum_step(a, c, g, lam, eps)


def _coordinate_descent(S, cov, noise_var, config, M, callback):
    L, N = S.shape
    step = _make_step(config, M)
    rng = make_rng(config.seed)
    ST = np.ascontiguousarray(S.T)
    gamma = np.zeros(N)
    sigma_inv = np.eye(L, dtype=np.complex128) / noise_var
    eye = np.eye(L)

    def objective(g):
        return _objective_from_cov(_model_cov(S, g, noise_var), cov) + penalty(g, config, M)

    trace = [objective(gamma)]
    converged = False
    n_refactor = 0
    n_rejected = 0
    sweeps = 0
    for sweep in range(1, config.max_sweeps + 1):
        for n in rng.permutation(N):
            s = ST[n]
            q = sigma_inv @ s
            a = np.vdot(s, q).real
            c = np.vdot(q, cov @ q).real
            delta = step(a, c, gamma[n])
            if delta == 0.0:
                continue
            denom = 1.0 + delta * a
            if denom <= 0.0:
                n_rejected += 1
                continue
            gamma[n] += delta
            if gamma[n] < 0.0:
                gamma[n] = 0.0
            sigma_inv -= (delta / denom) * np.outer(q, q.conj())
            if callback is not None:
                callback(gamma, n)
        sweeps = sweep
        sigma = _model_cov(S, gamma, noise_var)
        drift = np.linalg.norm(sigma_inv @ sigma - eye)
        if sweep % config.refresh_every == 0 or drift > config.consistency_tol:
            sigma_inv = linalg.cho_solve(_cho(sigma), eye.astype(np.complex128), check_finite=False)
            n_refactor += 1
        trace.append(objective(gamma))
        if trace[-2] - trace[-1] < config.tol:
            converged = True
            break
    diagnostics = {"refactorizations": n_refactor, "rejected_steps": n_rejected}
    return Estimate(gamma, trace, sweeps, converged, diagnostics)


def coordinate_descent_mle(S, cov_sample, noise_var, config=None, callback=None):
    """Randomized coordinate descent on the maximum-likelihood objective.

    Starts from ``gamma = 0`` with ``Sigma^{-1} = I / noise_var``. Each sweep
    visits the coordinates in a fresh random order; coordinate ``n`` moves by

        delta = max((q^H cov q - s^H q) / (s^H q)^2, -gamma_n),  q = Sigma^{-1} s_n

    followed by a Sherman-Morrison update of ``Sigma^{-1}``.

    Parameters
    ----------
    S : (L, N) complex array or SequenceMatrix
    cov_sample : (L, L) Hermitian array or CovMatrix
    noise_var : float
    config : SolverConfig, optional
        Any regularizer set here is ignored.
    callback : callable, optional
        Called as ``callback(gamma, n)`` after every accepted update.

    Returns
    -------
    Estimate
    """
    config = config or SolverConfig()
    if config.regularizer != "none":
        config = SolverConfig(**{**config.__dict__, "regularizer": "none", "lam": 0.0})
    S = as_sequences(S)
    cov = as_covariance(cov_sample, S.shape[0])
    check_positive(noise_var, "noise_var")
    return _coordinate_descent(S, cov, noise_var, config, 1, callback)


def coordinate_descent_regularized(S, cov_sample, noise_var, config, M, callback=None):
    """Coordinate descent on the objective plus ``R(gamma) / M``.

    ``R`` is ``lam * sum(gamma)`` (``'l1'``) or ``lam * sum(log(eps + gamma))``
    (``'log_sum'``). Every coordinate step is the exact minimizer of the
    one-dimensional restriction, so the objective never increases.
    """
    if config.regularizer == "none":
        raise ValueError("coordinate_descent_regularized needs a regularizer; use coordinate_descent_mle")
    check_positive(M, "M", integer=True)
    S = as_sequences(S)
    cov = as_covariance(cov_sample, S.shape[0])
    check_positive(noise_var, "noise_var")
    return _coordinate_descent(S, cov, noise_var, config, M, callback)


def nnls_objective(S, gamma, cov_sample, noise_var):
    """``||Sigma(gamma) - cov_sample||_F^2``."""
    S = as_sequences(S)
    L, N = S.shape
    gamma = check_gamma(gamma, N)
    cov = as_covariance(cov_sample, L)
    resid = _model_cov(S, gamma, noise_var) - cov
    return float(np.sum(np.abs(resid) ** 2))


def nnls(S, cov_sample, noise_var, config=None, callback=None):
    """Nonnegative least-squares covariance fit by cyclic coordinate descent.

    Minimizes ``||S diag(gamma) S^H + noise_var I - cov||_F^2`` over
    ``gamma >= 0``. Coordinates are visited in index order and each update
    is the clipped exact minimizer ``max(-Re(s^H R s) / ||s||^4, -gamma_n)``
    where ``R`` is the current residual.
    """
    config = config or SolverConfig()
    S = as_sequences(S)
    L, N = S.shape
    cov = as_covariance(cov_sample, L)
    check_positive(noise_var, "noise_var")
    ST = np.ascontiguousarray(S.T)
    norms4 = np.sum(np.abs(S) ** 2, axis=0) ** 2
    gamma = np.zeros(N)

    def residual(g):
        return _model_cov(S, g, noise_var) - cov

    resid = residual(gamma)
    trace = [float(np.sum(np.abs(resid) ** 2))]
    converged = False
    sweeps = 0
    for sweep in range(1, config.max_sweeps + 1):
        for n in range(N):
            s = ST[n]
            b = np.vdot(s, resid @ s).real
            delta = max(-b / norms4[n], -gamma[n])
            if delta == 0.0:
                continue
            gamma[n] = max(gamma[n] + delta, 0.0)
            resid += delta * np.outer(s, s.conj())
            if callback is not None:
                callback(gamma, n)
        sweeps = sweep
        if sweep % config.refresh_every == 0:
            resid = residual(gamma)
        trace.append(float(np.sum(np.abs(resid) ** 2)))
        if trace[-2] - trace[-1] < config.tol:
            converged = True
            break
    return Estimate(gamma, trace, sweeps, converged, {})


def detect(estimate, l_th):
    """Flag device ``n`` active when ``gamma_hat[n] >= l_th``."""
    gamma_hat = estimate.gamma_hat if isinstance(estimate, Estimate) else np.asarray(estimate, dtype=float)
    check_positive(l_th, "l_th", allow_zero=True)
    return Detection(gamma_hat >= l_th, float(l_th))
