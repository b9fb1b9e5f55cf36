"""Asymptotic error law of the MLE and the detection curves it implies.

For large M the scaled error ``sqrt(M) (gamma_hat - gamma0)`` behaves like the
projection ``mu*`` of a Gaussian ``x ~ N(0, M J^+)`` onto the cone of vectors
that are nonnegative on the inactive set, in the metric ``J / M``. This module
draws such samples and turns them (or actual estimates) into PMD/PFA curves.
"""

import warnings
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from ._nnls import nnls
from ._rng import make_rng
from ._validation import check_index_set, check_positive, complement
from .exceptions import InconclusiveError
from .fisher import DEFAULT_RANK_TOL, fisher_matrix
from .model import GroundTruth, as_sequences

MODES = ("activity_only", "joint_data")
DEFAULT_QP_TOL = 1e-7


@dataclass
class GaussianSampler:
    """Draws ``x = sum_r v_r sqrt(M / lambda_r) z_r`` over the retained eigenpairs of J."""

    eigvecs: np.ndarray
    eigvals: np.ndarray
    M: int
    rank_tol: float = DEFAULT_RANK_TOL

    @classmethod
    def from_fisher(cls, J, M, rank_tol=DEFAULT_RANK_TOL):
        J = _check_psd(J)
        check_positive(M, "M", integer=True)
        w, V = linalg.eigh(J, check_finite=False)
        top = w[-1] if w.size else 0.0
        keep = w > rank_tol * top if top > 0 else np.zeros(w.shape, dtype=bool)
        return cls(V[:, keep], w[keep], M, rank_tol)

    @property
    def rank(self):
        return self.eigvals.size

    def sample(self, n_samples, seed):
        check_positive(n_samples, "n_samples", integer=True)
        rng = make_rng(seed)
        z = rng.standard_normal((n_samples, self.rank))
        return (z * np.sqrt(self.M / self.eigvals)) @ self.eigvecs.T


@dataclass
class ErrorSampleSet:
    """Projected errors ``mu* / sqrt(M)``, one row per sample."""

    samples: np.ndarray
    zero_mass_per_inactive: np.ndarray
    inactive_set: np.ndarray
    active_set: np.ndarray
    M: int

    @property
    def inactive_errors(self):
        return self.samples[:, self.inactive_set]

    @property
    def active_errors(self):
        return self.samples[:, self.active_set]

    def histograms(self):
        """Pooled densities per coordinate class with Freedman-Diaconis bins.

        Returns a dict ``{'active': (density, edges), 'inactive': (density, edges)}``;
        classes without coordinates are omitted.
        """
        out = {}
        for name, vals in (("active", self.active_errors), ("inactive", self.inactive_errors)):
            vals = vals.ravel()
            if vals.size:
                edges = np.histogram_bin_edges(vals, bins="fd")
                out[name] = np.histogram(vals, bins=edges, density=True)
        return out


@dataclass
class RocCurve:
    thresholds: np.ndarray
    pmd: np.ndarray
    pfa: np.ndarray
    mode: str = "activity_only"


def _check_psd(J, tol=1e-8):
    J = np.asarray(J, dtype=float)
    if J.ndim != 2 or J.shape[0] != J.shape[1]:
        raise ValueError(f"J must be square, got shape {J.shape}")
    J = 0.5 * (J + J.T)
    if J.size:
        w = linalg.eigvalsh(J, check_finite=False)
        if w[0] < -tol * max(abs(w[-1]), 1e-300):
            raise ValueError(f"J is not positive semidefinite (min eigenvalue {w[0]:.3g})")
    return J


def sample_gaussian(J, M, n_samples, rank_tol=DEFAULT_RANK_TOL, seed=None):
    """Draw ``n_samples`` vectors from ``N(0, M J^+)``.

    Eigenvalues of ``J`` at or below ``rank_tol * lambda_max`` are dropped, so
    every sample is orthogonal to the numerical null space of ``J``.

    Returns
    -------
    ndarray of shape (n_samples, N)
    """
    return GaussianSampler.from_fisher(J, M, rank_tol).sample(n_samples, seed)


class ConeProjector:
    """Solver for ``min (x - mu)^T (J/M) (x - mu)`` s.t. ``mu_I >= 0``.

    The coordinates outside ``I`` are unconstrained and are eliminated in
    closed form, which leaves a nonnegative least-squares problem in
    ``mu_I`` (solved by the Lawson-Hanson active-set method). Setup cost is
    paid once, so projecting many samples against the same ``J`` is cheap.

    Parameters
    ----------
    J : (N, N) PSD array
    M : int
    inactive_set : array of int
    rank_tol : float, default=1e-9
        Relative eigenvalue cutoff used to factor ``J / M = F^T F``.
    qp_tol : float, default=1e-7
        Bound on the scaled KKT residual accepted from the solver.
    """

    def __init__(self, J, M, inactive_set, rank_tol=DEFAULT_RANK_TOL, qp_tol=DEFAULT_QP_TOL):
        J = _check_psd(J)
        check_positive(M, "M", integer=True)
        N = J.shape[0]
        self.N = N
        self.H = J / M
        self.inactive_set = check_index_set(inactive_set, N, "inactive_set")
        self.free_set = complement(self.inactive_set, N)
        self.qp_tol = qp_tol
        w, V = linalg.eigh(self.H, check_finite=False)
        top = w[-1] if w.size else 0.0
        keep = w > rank_tol * top if top > 0 else np.zeros(w.shape, dtype=bool)
        F = np.sqrt(w[keep])[:, None] * V[:, keep].T
        self.F = F
        F_I = F[:, self.inactive_set]
        F_c = F[:, self.free_set]
        if self.free_set.size and F.shape[0]:
            U, sv, _ = linalg.svd(F_c, full_matrices=False, check_finite=False)
            U = U[:, sv > rank_tol * sv[0]] if sv.size and sv[0] > 0 else U[:, :0]
            self.R = F_I - U @ (U.T @ F_I)
            self.lift = np.linalg.pinv(F_c, rcond=rank_tol) @ F_I
        else:
            self.R = F_I
            self.lift = np.zeros((self.free_set.size, self.inactive_set.size))
        self.h_scale = max(float(np.abs(self.H).max()), 1e-300) if self.H.size else 1.0

    def objective(self, x, mu):
        d = np.asarray(x, dtype=float) - mu
        return float(d @ self.H @ d)

    def kkt_residual(self, x, mu):
        """Largest violation of stationarity, dual feasibility and complementarity,
        relative to ``max|H| * (1 + ||x||_inf)``."""
        g = self.H @ (mu - x)
        I, free = self.inactive_set, self.free_set
        parts = [0.0]
        if free.size:
            parts.append(np.abs(g[free]).max())
        if I.size:
            parts.append(np.maximum(-g[I], 0.0).max())
            parts.append(np.abs(mu[I] * g[I]).max() / (1.0 + np.abs(mu[I]).max()))
            parts.append(np.maximum(-mu[I], 0.0).max())
        return float(max(parts)) / (self.h_scale * (1.0 + np.abs(x).max()))

    def project(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape != (self.N,):
            raise ValueError(f"x must have shape ({self.N},), got {x.shape}")
        I, free = self.inactive_set, self.free_set
        if I.size == 0 or np.all(x[I] >= 0):
            return x.copy()
        x_I = x[I]
        if self.R.shape[0] == 0:
            mu_I = np.maximum(x_I, 0.0)
        else:
            mu_I, ok = nnls(self.R, self.R @ x_I, maxiter=50 * I.size)
            if not ok:
                raise InconclusiveError("active-set QP did not reach optimality")
        mu = x.copy()
        mu[I] = mu_I
        if free.size:
            mu[free] = x[free] - self.lift @ (mu_I - x_I)
        resid = self.kkt_residual(x, mu)
        if resid > self.qp_tol:
            raise InconclusiveError(
                "projected point fails the KKT check",
                {"kkt_residual": resid, "objective": self.objective(x, mu)},
            )
        return mu


def project_qp(x, J, M, inactive_set, qp_tol=DEFAULT_QP_TOL, rank_tol=DEFAULT_RANK_TOL):
    """Project ``x`` onto ``{mu : mu_I >= 0}`` in the metric ``J / M``.

    Returns
    -------
    mu : ndarray of shape (N,)
        A minimizer; when ``J`` is singular the minimizer need not be unique
        but the objective value is.

    Raises
    ------
    InconclusiveError
        If the active-set solver stalls or the KKT residual exceeds ``qp_tol``.
    """
    return ConeProjector(J, M, inactive_set, rank_tol, qp_tol).project(x)


def error_distribution(S, ground_truth, noise_var, M, n_samples, seed, rank_tol=DEFAULT_RANK_TOL,
                       qp_tol=DEFAULT_QP_TOL, verify_condition=True):
    """Monte-Carlo samples of the limiting error ``mu* / sqrt(M)``.

    Parameters
    ----------
    S : (L, N) complex array
    ground_truth : GroundTruth or array of shape (N,)
    noise_var : float
    M : int
    n_samples : int
    seed : int or Generator
    verify_condition : bool, default=True
        Run the covariance-matching identifiability test first and warn if
        it fails; the prediction is only meaningful when it holds.

    Returns
    -------
    ErrorSampleSet
    """
    S = as_sequences(S)
    if not isinstance(ground_truth, GroundTruth):
        ground_truth = GroundTruth.from_gamma(ground_truth)
    if verify_condition:
        from .phase import check_condition_covmatch

        try:
            ok = check_condition_covmatch(S, ground_truth.inactive_set).satisfied
        except InconclusiveError:
            ok = False
        if not ok:
            warnings.warn("identifiability condition does not hold; the error prediction is unreliable", stacklevel=2)
    J = fisher_matrix(S, ground_truth.gamma0, noise_var, M).J
    x = sample_gaussian(J, M, n_samples, rank_tol, seed)
    projector = ConeProjector(J, M, ground_truth.inactive_set, rank_tol, qp_tol)
    mu = np.vstack([projector.project(row) for row in x])
    I = ground_truth.inactive_set
    # nnls returns exact zeros on the bound
    mu[:, I] = np.maximum(mu[:, I], 0.0)
    samples = mu / np.sqrt(M)
    zero_mass = np.mean(samples[:, I] == 0.0, axis=0) if I.size else np.zeros(0)
    return ErrorSampleSet(samples, zero_mass, I, ground_truth.active_set, M)


def _thresholds_from(*arrays):
    vals = np.concatenate([np.ravel(a) for a in arrays] + [[0.0]])
    return np.unique(vals[np.isfinite(vals)])


def _frac_at_least(sorted_vals, thresholds):
    if sorted_vals.size == 0:
        return np.zeros(thresholds.shape)
    return (sorted_vals.size - np.searchsorted(sorted_vals, thresholds, side="left")) / sorted_vals.size


def _frac_below(sorted_vals, thresholds):
    if sorted_vals.size == 0:
        return np.zeros(thresholds.shape)
    return np.searchsorted(sorted_vals, thresholds, side="left") / sorted_vals.size


def roc_activity(values, gamma0, thresholds=None):
    """Detection curve for thresholding each coordinate of ``values``.

    ``values`` has one row per trial (estimates, or ``gamma0 + error``
    samples). PFA pools inactive coordinates, PMD pools active ones.
    """
    values = np.atleast_2d(np.asarray(values, dtype=float))
    gamma0 = np.asarray(gamma0, dtype=float)
    if values.shape[0] == 0:
        raise ValueError("empty sample set")
    active = gamma0 > 0
    act = np.sort(values[:, active].ravel())
    inact = np.sort(values[:, ~active].ravel())
    thresholds = _thresholds_from(act, inact) if thresholds is None else np.asarray(thresholds, dtype=float)
    return RocCurve(thresholds, _frac_below(act, thresholds), _frac_at_least(inact, thresholds), "activity_only")


def roc_joint(values, symbols, Q, thresholds=None):
    """Detection curve for joint activity and data decisions.

    Each block of ``Q`` lifted coordinates is reduced to its largest entry
    (ties to the lowest index). An active device is missed when its block
    maximum is below the threshold or sits at the wrong sequence; an
    inactive device is a false alarm when its block maximum reaches the
    threshold, whatever the sequence.

    Parameters
    ----------
    values : (n_trials, N * Q) array
    symbols : (N,) int array
        Transmitted sequence index per device, ``-1`` for inactive devices.
    Q : int
    """
    values = np.atleast_2d(np.asarray(values, dtype=float))
    symbols = np.asarray(symbols)
    if values.shape[0] == 0:
        raise ValueError("empty sample set")
    N = symbols.size
    if values.shape[1] != N * Q:
        raise ValueError(f"values must have {N * Q} columns, got {values.shape[1]}")
    blocks = values.reshape(values.shape[0], N, Q)
    peak = blocks.max(axis=2)
    choice = blocks.argmax(axis=2)
    active = symbols >= 0
    right = choice[:, active] == symbols[active]
    n_act = right.size
    act_ok = np.sort(peak[:, active][right])
    inact = np.sort(peak[:, ~active].ravel())
    thresholds = _thresholds_from(act_ok, inact) if thresholds is None else np.asarray(thresholds, dtype=float)
    if n_act:
        wrong = n_act - act_ok.size
        pmd = (wrong + np.searchsorted(act_ok, thresholds, side="left")) / n_act
    else:
        pmd = np.zeros(thresholds.shape)
    return RocCurve(thresholds, pmd, _frac_at_least(inact, thresholds), "joint_data")


def predict_roc(error_samples, ground_truth, thresholds=None, mode="activity_only"):
    """Detection curve implied by the error samples.

    ``ground_truth`` is a ``GroundTruth`` for ``activity_only`` or an
    ``EmbedGroundTruth`` for ``joint_data``; errors are added to the true
    values before thresholding.
    """
    samples = error_samples.samples if isinstance(error_samples, ErrorSampleSet) else np.asarray(error_samples)
    if samples.size == 0:
        raise ValueError("empty sample set")
    if mode == "activity_only":
        gamma0 = ground_truth.gamma0 if hasattr(ground_truth, "gamma0") else ground_truth.gamma_tilde
        return roc_activity(gamma0 + samples, gamma0, thresholds)
    if mode == "joint_data":
        return roc_joint(ground_truth.gamma_tilde + samples, ground_truth.symbols, ground_truth.Q, thresholds)
    raise ValueError(f"mode must be one of {MODES}, got {mode!r}")


def pmd_at_pfa(curve, target):
    """PMD where the curve first reaches ``pfa <= target``, interpolated
    linearly between the bracketing thresholds."""
    pfa, pmd = curve.pfa, curve.pmd
    hit = np.flatnonzero(pfa <= target)
    if hit.size == 0:
        return float("nan")
    k = hit[0]
    if k == 0 or pfa[k] == target or pfa[k - 1] == pfa[k]:
        return float(pmd[k])
    w = (pfa[k - 1] - target) / (pfa[k - 1] - pfa[k])
    return float(pmd[k - 1] + w * (pmd[k] - pmd[k - 1]))


def pfa_at_pmd(curve, target):
    """PFA at the last threshold with ``pmd <= target`` (interpolated)."""
    pfa, pmd = curve.pfa, curve.pmd
    over = np.flatnonzero(pmd > target)
    if over.size == 0:
        return float(pfa[-1])
    k = over[0]
    if k == 0:
        return float("nan")
    if pmd[k] == pmd[k - 1]:
        return float(pfa[k - 1])
    w = (target - pmd[k - 1]) / (pmd[k] - pmd[k - 1])
    return float(pfa[k - 1] + w * (pfa[k] - pfa[k - 1]))


def equal_error_rate(curve):
    """Error probability where PFA equals PMD.

    Returns
    -------
    rate : float
    threshold : float
        Interpolated threshold at the crossing.
    """
    diff = curve.pfa - curve.pmd
    cross = np.flatnonzero(diff <= 0)
    if cross.size == 0:
        return float(curve.pfa[-1]), float(curve.thresholds[-1])
    k = cross[0]
    if k == 0 or diff[k] == 0:
        return float(0.5 * (curve.pfa[k] + curve.pmd[k])), float(curve.thresholds[k])
    w = diff[k - 1] / (diff[k - 1] - diff[k])
    rate = curve.pfa[k - 1] + w * (curve.pfa[k] - curve.pfa[k - 1])
    thr = curve.thresholds[k - 1] + w * (curve.thresholds[k] - curve.thresholds[k - 1])
    return float(rate), float(thr)
