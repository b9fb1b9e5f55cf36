"""Identifiability tests and phase-transition sweeps.

For a sequence matrix ``S`` and inactive set ``I``, the MLE is consistent as
``M -> inf`` exactly when no nonzero direction in the null space of the
Fisher matrix (equivalently of ``D``) is nonnegative on ``I``. Two
certificate-producing tests decide this:

* ``check_condition_fim`` solves a max-margin LP on the Schur complement of
  the Fisher matrix.
* ``check_condition_covmatch`` asks whether the origin lies in the convex
  hull of the projected columns of ``D`` on ``I``; it is solved as a
  least-distance program with Lawson-Hanson NNLS.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg
from scipy.optimize import linprog

from ._nnls import nnls
from ._rng import ROLE_SEQUENCES, ROLE_SUPPORT, make_rng
from ._validation import check_index_set, check_positive, complement
from .exceptions import InconclusiveError
from .fisher import DEFAULT_RANK_TOL, block_split, build_D, fisher_matrix, numerical_rank
from .model import (
    default_noise_var,
    gen_ground_truth,
    gen_sequences,
    as_sequences,
    true_covariance,
)

METHODS = ("fim_lp", "covmatch_lp", "dim_shortcut")
STRICT_EPS = 1e-9
RCOND_MIN = 1e-10
HULL_TOL = 1e-9
# stopping rule for the noiseless (M -> inf) recovery runs
EMPIRICAL_SOLVER = {"tol": 1e-8, "max_sweeps": 5000}


@dataclass
class ConditionVerdict:
    satisfied: bool
    method: str
    certificate: np.ndarray = None
    diagnostics: dict = field(default_factory=dict)


@dataclass
class PhaseGrid:
    """Success fractions over an (L, K) grid.

    ``Q`` is the number of sequences per device (1 without data embedding);
    the normalized axes divide by ``N * Q``.
    """

    N: int
    L_list: list
    K_list: list
    trials: int
    success_fraction: np.ndarray
    n_inconclusive: np.ndarray = None
    Q: int = 1
    method: str = "covmatch_lp"
    n_tol_sensitive: np.ndarray = None

    @property
    def std_error(self):
        """Binomial standard error of each success fraction (draw randomness)."""
        p = self.success_fraction
        return np.sqrt(p * (1.0 - p) / self.trials)

    @property
    def L2_over_N(self):
        return np.asarray(self.L_list, dtype=float) ** 2 / (self.N * self.Q)

    @property
    def K_over_N(self):
        return np.asarray(self.K_list, dtype=float) / (self.N * self.Q)

    def rows(self):
        """One dict per cell, L-major order."""
        zeros = np.zeros(self.success_fraction.shape, dtype=int)
        inconclusive = zeros if self.n_inconclusive is None else self.n_inconclusive
        sensitive = zeros if self.n_tol_sensitive is None else self.n_tol_sensitive
        std_error = self.std_error
        out = []
        for i, L in enumerate(self.L_list):
            for j, K in enumerate(self.K_list):
                out.append(
                    {
                        "L": int(L),
                        "K": int(K),
                        "L2_over_N": float(self.L2_over_N[i]),
                        "K_over_N": float(self.K_over_N[j]),
                        "success_fraction": float(self.success_fraction[i, j]),
                        "n_trials": int(self.trials),
                        "n_inconclusive": int(inconclusive[i, j]),
                        "std_error": float(std_error[i, j]),
                        "n_tol_sensitive": int(sensitive[i, j]),
                    }
                )
        return out

    def boundary_index(self, level=0.5):
        """Per L row, index of the first K whose success fraction drops below ``level``."""
        below = self.success_fraction < level
        return np.where(below.any(axis=1), below.argmax(axis=1), below.shape[1])


TOL_BAND = 1e3


def tolerance_sensitive(verdict, rank_tol=DEFAULT_RANK_TOL, hull_tol=HULL_TOL, strict_eps=STRICT_EPS):
    """Whether the verdict would change if a decision tolerance moved by up to ``TOL_BAND``.

    Looks at the quantity each test compares with its tolerance: the
    relative smallest singular value of the active columns, the distance
    from the origin to the hull, or the LP margin.
    """
    d = verdict.diagnostics

    def near(value, tol):
        return value is not None and tol / TOL_BAND <= value <= tol * TOL_BAND

    if near(d.get("rank_ratio"), rank_tol) or near(d.get("C_rcond"), RCOND_MIN):
        return True
    for key in ("distance", "distance_lower_bound"):
        if near(d.get(key), hull_tol):
            return True
    return near(d.get("margin"), strict_eps)


def check_dim_necessary(J_or_D, inactive_set, rank_tol=DEFAULT_RANK_TOL):
    """Dimension shortcut.

    Returns an unsatisfied verdict when the null space has dimension at
    least ``|I|`` (and is nontrivial), otherwise ``None`` meaning that an LP
    test is needed. A trivial null space makes the condition hold, which the
    LP tests confirm.
    """
    mat = np.asarray(J_or_D)
    n = mat.shape[1]
    I = check_index_set(inactive_set, n, "inactive_set")
    dim_null = n - numerical_rank(mat, rank_tol)
    if dim_null > 0 and dim_null >= I.size:
        return ConditionVerdict(False, "dim_shortcut", None, {"dim_null": dim_null, "n_inactive": int(I.size)})
    return None


def _support_gamma(N, active):
    gamma = np.zeros(N)
    gamma[active] = 1.0
    return gamma


def check_condition_fim(S, active_set, noise_var=1.0, strict_eps=STRICT_EPS, rank_tol=DEFAULT_RANK_TOL):
    """Max-margin LP test on the Fisher matrix.

    With ``J`` split into blocks ``A`` (inactive), ``B``, ``C`` (active) the
    condition holds iff ``C`` is invertible and some ``x`` has
    ``(A - B C^{-1} B^T) x > 0``. The LP maximizes ``t`` subject to
    ``G x >= t`` and ``-1 <= x <= 1`` with ``G`` scaled to unit Frobenius
    norm, and the verdict uses the margin recomputed from the returned ``x``.

    Parameters
    ----------
    S : (L, N) complex array
    active_set : array of int
        Support of the fading vector; its values are set to 1.
    noise_var : float, default=1.0
        Immaterial for the verdict.
    strict_eps : float, default=1e-9
        Margin threshold relative to ``||G||_F``. It is raised to the
        estimated round-off level of ``G`` when that is larger, and a ``G``
        below its round-off level counts as zero (no margin possible).

    Returns
    -------
    ConditionVerdict
        ``certificate`` is the maximizing ``x`` (on the inactive coordinates).
    """
    S = as_sequences(S)
    N = S.shape[1]
    active = check_index_set(active_set, N, "active_set")
    I = complement(active, N)
    J = fisher_matrix(S, _support_gamma(N, active), noise_var, 1).J
    blocks = block_split(J, I)
    diag = {"n_inactive": int(I.size)}
    if active.size:
        cond = np.linalg.cond(blocks.C)
        rcond = 0.0 if not np.isfinite(cond) else 1.0 / cond
        diag["C_rcond"] = rcond
        diag["C_invertible"] = bool(rcond > RCOND_MIN)
        if not diag["C_invertible"]:
            return ConditionVerdict(False, "fim_lp", None, diag)
        G = blocks.A - blocks.B @ linalg.solve(blocks.C, blocks.B.T, assume_a="pos")
        # forming the Schur complement loses about cond(C) * eps * ||J||;
        # when rank(J) = K the exact G is zero and all of it is round-off
        noise = 10.0 * active.size * np.finfo(float).eps * cond * np.linalg.norm(J)
    else:
        diag["C_invertible"] = True
        G = blocks.A
        noise = 0.0
    if I.size == 0:
        return ConditionVerdict(True, "fim_lp", np.zeros(0), diag)
    G = 0.5 * (G + G.T)
    scale = np.linalg.norm(G)
    diag["schur_noise_ratio"] = float(noise / scale) if scale > 0 else np.inf
    if scale <= noise:
        diag["margin"] = 0.0
        return ConditionVerdict(False, "fim_lp", np.zeros(I.size), diag)
    Gn = G / scale
    n = I.size
    c = np.zeros(n + 1)
    c[-1] = -1.0
    A_ub = np.hstack([-Gn, np.ones((n, 1))])
    bounds = [(-1.0, 1.0)] * n + [(None, None)]
    res = linprog(
        c,
        A_ub=A_ub,
        b_ub=np.zeros(n),
        bounds=bounds,
        method="highs",
        options={"maxiter": 10 * (2 * n + 1), "primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10},
    )
    if res.status != 0:
        raise InconclusiveError(f"margin LP did not finish: {res.message}", {**diag, "lp_status": res.status})
    x = res.x[:n]
    margin = float(np.min(Gn @ x))
    diag["margin"] = margin
    return ConditionVerdict(bool(margin > max(strict_eps, diag["schur_noise_ratio"])), "fim_lp", x, diag)


def _ho_kashyap(W, iters):
    """Look for ``z`` with ``W^T z > 0`` by Ho-Kashyap margin updates.

    Returns ``None`` when no separator is found within ``iters`` steps; this
    is not a proof of inseparability.
    """
    A = W.T
    if iters <= 0 or A.shape[0] < A.shape[1]:
        return None
    Qa, Ra = linalg.qr(A, mode="economic", check_finite=False)
    if np.abs(np.diag(Ra)).min() <= 1e-12 * np.abs(np.diag(Ra)).max():
        return None
    b = np.ones(A.shape[0])
    for _ in range(iters):
        z = linalg.solve_triangular(Ra, Qa.T @ b, check_finite=False)
        Az = A @ z
        if Az.min() > 0:
            return z
        e = Az - b
        b += e + np.abs(e)
    return None


def check_condition_covmatch(S, inactive_set, rank_tol=DEFAULT_RANK_TOL, hull_tol=HULL_TOL, hk_iters=300):
    """Covariance-matching test on the real lifted matrix ``D``.

    The condition holds iff ``D`` restricted to the active columns has full
    column rank and ``{D x = 0, 1^T x_I = 1, x_I >= 0}`` is infeasible.
    After projecting out the active columns (``W = Q2^T D_I`` with ``Q2`` an
    orthonormal basis of their orthogonal complement) this asks whether the
    origin lies in the convex hull of the columns of ``W``. The distance from
    the origin to that hull is the violation measure: it is found from the
    least-distance program ``min ||z|| s.t. W^T z >= 1`` solved by NNLS, which
    returns either a separating ``z`` or a convex combination hitting zero.
    A cheap Ho-Kashyap search for a separating ``z`` runs first; any
    separator it finds is a proof on its own, so the NNLS stage only runs
    when it fails.

    Returns
    -------
    ConditionVerdict
        When unsatisfied through infeasibility, ``certificate`` is the full
        length-N ``x`` with ``D x ~ 0`` and ``sum(x_I) = 1``. When
        satisfied, ``diagnostics['separator']`` holds ``W^T z``.
    """
    S = as_sequences(S)
    N = S.shape[1]
    I = check_index_set(inactive_set, N, "inactive_set")
    active = complement(I, N)
    K = active.size
    D = build_D(S)
    D_c = D[:, active]
    D_I = D[:, I]
    diag = {"n_inactive": int(I.size)}
    if K:
        sv = linalg.svd(D_c, compute_uv=False, check_finite=False)
        diag["rank_ratio"] = float(sv[-1] / sv[0]) if K <= D_c.shape[0] and sv[0] > 0 else 0.0
        rank_c = int(np.sum(sv > rank_tol * sv[0])) if sv[0] > 0 else 0
    else:
        rank_c = 0
    diag["rank_DIc_full"] = bool(rank_c == K)
    if rank_c < K:
        return ConditionVerdict(False, "covmatch_lp", None, diag)
    if I.size == 0:
        return ConditionVerdict(True, "covmatch_lp", None, diag)
    if K:
        Q, _ = linalg.qr(D_c, mode="full", check_finite=False)
        W = Q[:, K:].T @ D_I
    else:
        W = D_I
    if W.shape[0] == 0:
        diag["distance"] = 0.0
        x = np.zeros(N)
        x[I] = 1.0 / I.size
        return ConditionVerdict(False, "covmatch_lp", x, diag)
    scale = np.linalg.norm(W)
    if scale == 0:
        diag["distance"] = 0.0
        x = np.zeros(N)
        x[I] = 1.0 / I.size
        return ConditionVerdict(False, "covmatch_lp", x, diag)
    W = W / scale
    n = I.size
    z = _ho_kashyap(W, hk_iters)
    if z is not None:
        separator = W.T @ z
        lower = float(separator.min() / np.linalg.norm(z))
        if lower > hull_tol:
            diag.update(stage="ho_kashyap", distance_lower_bound=lower, separator=separator)
            return ConditionVerdict(True, "covmatch_lp", None, diag)
    diag["stage"] = "nnls"
    E = np.vstack([W, np.ones((1, n))])
    f = np.zeros(E.shape[0])
    f[-1] = 1.0
    u, ok = nnls(E, f, maxiter=10 * (E.shape[0] + n))
    if not ok:
        raise InconclusiveError("least-distance program did not reach optimality", diag)
    resid = E @ u - f
    total = u.sum()
    distance = float(np.linalg.norm(W @ u) / total) if total > 0 else np.inf
    diag["distance"] = distance
    if distance <= hull_tol:
        x = np.zeros(N)
        x[I] = u / total
        if K:
            x[active] = -np.linalg.lstsq(D_c, D_I @ x[I], rcond=None)[0]
        return ConditionVerdict(False, "covmatch_lp", x, diag)
    if abs(resid[-1]) < 1e-300:
        raise InconclusiveError("least-distance program returned a degenerate residual", diag)
    z = -resid[:-1] / resid[-1]
    separator = W.T @ z
    diag["separator_min"] = float(separator.min())
    if separator.min() <= 0:
        raise InconclusiveError("separating direction failed re-verification", diag)
    diag["separator"] = separator
    return ConditionVerdict(True, "covmatch_lp", None, diag)


def check_condition(S, active_set, method="covmatch_lp", shortcut=True, rank_tol=DEFAULT_RANK_TOL):
    """Run the dimension shortcut (optional) and then the chosen LP test."""
    S = as_sequences(S)
    N = S.shape[1]
    active = check_index_set(active_set, N, "active_set")
    I = complement(active, N)
    # rank(D) <= min(L^2, N), so the shortcut can only fire when the rank
    # drops to K or below; generic draws reach that only for K >= L^2 and
    # the LP tests return the same verdict in the remaining degenerate cases
    if shortcut and min(S.shape[0] ** 2, N) <= active.size:
        verdict = check_dim_necessary(build_D(S), I, rank_tol)
        if verdict is not None:
            return verdict
    if method == "fim_lp":
        return check_condition_fim(S, active, rank_tol=rank_tol)
    if method == "covmatch_lp":
        return check_condition_covmatch(S, I, rank_tol=rank_tol)
    raise ValueError(f"method must be 'fim_lp' or 'covmatch_lp', got {method!r}")


def draw_instance(N, L, K, trial, seed, kind="gaussian", Q=1):
    """Sequences and support for one phase-sweep trial.

    Streams are keyed by ``(L, K, trial, role)`` so the same cell and trial
    index gives the same instance in every grid. With ``Q > 1`` the matrix
    has ``N * Q`` columns and the ``K`` active columns are picked one per
    active device block.
    """
    S = gen_sequences(kind, L, N * Q, make_rng(seed, L, K, trial, ROLE_SEQUENCES)).entries
    rng = make_rng(seed, L, K, trial, ROLE_SUPPORT)
    devices = gen_ground_truth(N, K, 1.0, rng).active_set
    if Q == 1:
        return S, devices
    symbols = rng.integers(0, Q, size=devices.size)
    return S, np.sort(devices * Q + symbols)


def _map(fn, tasks, n_jobs):
    if n_jobs is None or n_jobs <= 1:
        return [fn(t) for t in tasks]
    with ThreadPoolExecutor(max_workers=n_jobs) as pool:
        return list(pool.map(fn, tasks))


def _sweep(N, L_list, K_list, trials, seed, trial_fn, n_jobs, Q, method):
    check_positive(N, "N", integer=True)
    check_positive(trials, "trials", integer=True)
    for K in K_list:
        if K > N:
            raise ValueError(f"K={K} exceeds N={N}")
    tasks = [(i, j, t) for i in range(len(L_list)) for j in range(len(K_list)) for t in range(trials)]
    results = _map(lambda task: trial_fn(L_list[task[0]], K_list[task[1]], task[2]), tasks, n_jobs)
    shape = (len(L_list), len(K_list))
    success = np.zeros(shape)
    inconclusive = np.zeros(shape, dtype=int)
    sensitive = np.zeros(shape, dtype=int)
    for (i, j, _), outcome in zip(tasks, results):
        if outcome is None:
            inconclusive[i, j] += 1
            continue
        ok, near = outcome
        success[i, j] += ok
        sensitive[i, j] += near
    return PhaseGrid(N, list(L_list), list(K_list), trials, success / trials, inconclusive, Q, method, sensitive)


def phase_sweep(N, L_list, K_list, trials, method="covmatch_lp", seed=0, kind="gaussian", Q=1,
                shortcut=True, rank_tol=DEFAULT_RANK_TOL, n_jobs=1):
    """Fraction of random instances satisfying the identifiability condition.

    Each trial draws a fresh ``S`` and support (see :func:`draw_instance`).
    Trials whose test is inconclusive count as failures and are tallied in
    ``n_inconclusive``; trials decided within a factor ``TOL_BAND`` of a
    tolerance are tallied in ``n_tol_sensitive``.

    Returns
    -------
    PhaseGrid
    """

    def trial(L, K, t):
        S, active = draw_instance(N, L, K, t, seed, kind, Q)
        try:
            verdict = check_condition(S, active, method, shortcut, rank_tol)
        except InconclusiveError:
            return None
        return verdict.satisfied, tolerance_sensitive(verdict, rank_tol)

    return _sweep(N, L_list, K_list, trials, seed, trial, n_jobs, Q, method)


def empirical_transition(N, L_list, K_list, trials, solver_config=None, seed=0, kind="gaussian", Q=1, n_jobs=1):
    """Fraction of instances where coordinate descent on the true covariance
    recovers the support exactly (threshold ``1/2`` on unit active values).

    Uses the same instances as :func:`phase_sweep` for matching arguments.
    The default stopping rule is much tighter than the finite-M default:
    near the boundary the iterates approach the truth slowly and an early
    stop would be scored as a failure.
    """
    from .solvers import SolverConfig, coordinate_descent_mle

    solver_config = solver_config or SolverConfig(**EMPIRICAL_SOLVER)

    def trial(L, K, t):
        S, active = draw_instance(N, L, K, t, seed, kind, Q)
        gamma0 = _support_gamma(S.shape[1], active)
        noise_var = default_noise_var(L)
        cov = true_covariance(S, gamma0, noise_var)
        est = coordinate_descent_mle(S, cov, noise_var, solver_config)
        return bool(np.array_equal(np.flatnonzero(est.gamma_hat >= 0.5), active)), False

    return _sweep(N, L_list, K_list, trials, seed, trial, n_jobs, Q, "empirical")
