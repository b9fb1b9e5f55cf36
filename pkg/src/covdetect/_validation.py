"""Input validation helpers shared by the public functions and estimators.

These mirror the role of ``sklearn.utils.validation`` but accept complex
arrays, which scikit-learn's ``check_array`` rejects.
"""

import numbers

import numpy as np


def check_sequences(S, name="S"):
    """Return ``S`` as a 2-D complex128 array of shape (L, N)."""
    S = np.asarray(S)
    if S.ndim != 2:
        raise ValueError(f"{name} must be 2-D (L, N), got shape {S.shape}")
    if S.shape[0] < 1 or S.shape[1] < 1:
        raise ValueError(f"{name} must be non-empty, got shape {S.shape}")
    S = S.astype(np.complex128, copy=False)
    if not np.all(np.isfinite(S)):
        raise ValueError(f"{name} contains NaN or inf")
    return S


def check_gamma(gamma, n, name="gamma"):
    """Return a nonnegative float vector of length ``n``."""
    gamma = np.asarray(gamma, dtype=float)
    if gamma.ndim != 1 or gamma.shape[0] != n:
        raise ValueError(f"{name} must have shape ({n},), got {gamma.shape}")
    if not np.all(np.isfinite(gamma)):
        raise ValueError(f"{name} contains NaN or inf")
    if np.any(gamma < 0):
        raise ValueError(f"{name} must be nonnegative")
    return gamma


def check_covariance(cov, L, name="cov", hermitian_tol=1e-8):
    """Return an (L, L) complex array, symmetrized; reject non-Hermitian input."""
    cov = np.asarray(cov)
    if cov.shape != (L, L):
        raise ValueError(f"{name} must have shape ({L}, {L}), got {cov.shape}")
    cov = cov.astype(np.complex128, copy=False)
    if not np.all(np.isfinite(cov)):
        raise ValueError(f"{name} contains NaN or inf")
    scale = max(np.abs(cov).max(), 1.0)
    if np.abs(cov - cov.conj().T).max() > hermitian_tol * scale:
        raise ValueError(f"{name} is not Hermitian")
    return 0.5 * (cov + cov.conj().T)


def check_positive(value, name, integer=False, allow_zero=False):
    if integer:
        if not isinstance(value, numbers.Integral) or isinstance(value, bool):
            raise ValueError(f"{name} must be an integer, got {value!r}")
    elif not isinstance(value, numbers.Real) or not np.isfinite(value):
        raise ValueError(f"{name} must be a finite real number, got {value!r}")
    if value < 0 or (value == 0 and not allow_zero):
        bound = ">= 0" if allow_zero else "> 0"
        raise ValueError(f"{name} must be {bound}, got {value!r}")
    return value


def check_index_set(indices, n, name="index set"):
    """Return a sorted unique int array of indices in ``[0, n)``."""
    idx = np.asarray(indices if indices is not None else [], dtype=np.int64).ravel()
    if idx.size and (idx.min() < 0 or idx.max() >= n):
        raise IndexError(f"{name} has entries outside [0, {n})")
    return np.unique(idx)


def complement(indices, n):
    mask = np.ones(n, dtype=bool)
    mask[indices] = False
    return np.flatnonzero(mask)
