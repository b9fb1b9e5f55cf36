"""Nonnegative least squares with a KKT check.

``scipy.optimize.nnls`` (1.15) occasionally stops at a point that violates
the optimality conditions on rank-deficient or underdetermined problems.
The wrapper below verifies its output and, when needed, resumes a
Lawson-Hanson active-set iteration from the returned support.
"""

import numpy as np
from scipy import linalg
from scipy.optimize import nnls as _scipy_nnls

KKT_TOL = 1e-10


def _scale(A, b, x):
    a = np.linalg.norm(A)
    return max(a * max(np.linalg.norm(b), a * np.abs(x).max(initial=0.0)), 1e-300)


def kkt_violation(A, b, x):
    """Largest violation of the NNLS optimality conditions, relative to the data scale."""
    w = A.T @ (b - A @ x)
    pos = x > 0
    viol = 0.0
    if pos.any():
        viol = np.abs(w[pos]).max()
    if (~pos).any():
        viol = max(viol, w[~pos].max())
    return float(max(viol, 0.0)) / _scale(A, b, x)


def _lawson_hanson(A, b, x, tol, maxiter):
    n = A.shape[1]
    x = np.maximum(x, 0.0)
    passive = x > 0

    def sub(mask):
        z = np.zeros(n)
        if mask.any():
            z[mask] = linalg.lstsq(A[:, mask], b, check_finite=False, lapack_driver="gelsy")[0]
        return z

    def restore(x, passive):
        # move from feasible x toward the unconstrained subproblem solution
        for _ in range(n + 1):
            z = sub(passive)
            bad = passive & (z <= 0)
            if not bad.any():
                return z, passive
            ratio = x[bad] / (x[bad] - z[bad])
            alpha = ratio.min()
            x = x + alpha * (z - x)
            passive = passive & (x > 1e-15 * max(1.0, np.abs(x).max()))
            x[~passive] = 0.0
        return np.maximum(x, 0.0), passive

    if passive.any():
        x, passive = restore(x, passive)
    scale = _scale(A, b, x)
    for _ in range(maxiter):
        w = A.T @ (b - A @ x)
        cand = ~passive & (w > tol * scale)
        if not cand.any():
            return x, True
        j = np.flatnonzero(cand)[np.argmax(w[cand])]
        passive[j] = True
        z = sub(passive)
        if z[j] <= 0:
            # column adds nothing in floating point; stop rather than cycle
            passive[j] = False
            cand[j] = False
            if not cand.any():
                return x, True
            continue
        x, passive = restore(x, passive)
    return x, False


def nnls(A, b, maxiter=None, tol=KKT_TOL):
    """Solve ``min ||A x - b||`` over ``x >= 0``.

    Returns
    -------
    x : ndarray
    ok : bool
        Whether the KKT conditions hold to ``tol`` (relative).
    """
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    n = A.shape[1]
    maxiter = maxiter or 10 * n
    try:
        x, _ = _scipy_nnls(A, b, maxiter=maxiter)
    except RuntimeError:
        x = np.zeros(n)
    if kkt_violation(A, b, x) <= tol:
        return x, True
    x, _ = _lawson_hanson(A, b, x, tol, maxiter)
    return x, kkt_violation(A, b, x) <= tol * 10
