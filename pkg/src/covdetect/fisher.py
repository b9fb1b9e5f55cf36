"""Fisher information and the lifted (vectorized) sequence matrices."""

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from ._validation import check_gamma, check_index_set, check_positive, complement
from .exceptions import NumericalError
from .model import as_sequences

DEFAULT_RANK_TOL = 1e-9


@dataclass
class FisherMatrix:
    J: np.ndarray
    M: int

    def __array__(self, dtype=None, copy=None):
        return self.J if dtype is None else self.J.astype(dtype)

    @property
    def shape(self):
        return self.J.shape


@dataclass
class LiftedMatrices:
    S_hat: np.ndarray
    D: np.ndarray


@dataclass
class BlockSplit:
    """Blocks of ``J`` on the inactive set ``I`` and its complement."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    inactive_set: np.ndarray
    active_set: np.ndarray

    def reassemble(self):
        n = self.inactive_set.size + self.active_set.size
        J = np.empty((n, n))
        I, Ic = self.inactive_set, self.active_set
        J[np.ix_(I, I)] = self.A
        J[np.ix_(I, Ic)] = self.B
        J[np.ix_(Ic, I)] = self.B.T
        J[np.ix_(Ic, Ic)] = self.C
        return J


def fisher_matrix(S, gamma, noise_var, M=1):
    """Fisher information of ``gamma`` for M antennas.

    ``J = M |P|^2`` (entrywise) with ``P = S^H Sigma^{-1} S`` and
    ``Sigma = S diag(gamma) S^H + noise_var I``.

    Returns
    -------
    FisherMatrix
    """
    S = as_sequences(S)
    L, N = S.shape
    gamma = check_gamma(gamma, N)
    check_positive(noise_var, "noise_var")
    check_positive(M, "M", integer=True)
    sigma = (S * gamma) @ S.conj().T
    sigma = 0.5 * (sigma + sigma.conj().T)
    sigma[np.diag_indices(L)] += noise_var
    try:
        factor = linalg.cho_factor(sigma, lower=True, check_finite=False)
    except linalg.LinAlgError as exc:
        raise NumericalError("model covariance is not positive definite") from exc
    P = S.conj().T @ linalg.cho_solve(factor, S, check_finite=False)
    J = M * np.abs(P) ** 2
    return FisherMatrix(0.5 * (J + J.T), M)


def khatri_rao(S):
    """Column-wise Kronecker product; column ``n`` is ``conj(s_n) kron s_n``.

    With this layout ``khatri_rao(S) @ gamma`` equals the column-major
    vectorization of ``S diag(gamma) S^H``.
    """
    S = as_sequences(S)
    L, N = S.shape
    return (S.conj()[:, None, :] * S[None, :, :]).reshape(L * L, N)


def build_D(S, isometric=False):
    """Real L^2 x N encoding of the rows of the Khatri-Rao lift.

    Row order: the symmetric family ``Re r_i * Re r_j + Im r_i * Im r_j`` for
    ``i <= j`` in lexicographic order, followed by the antisymmetric family
    ``Re r_i * Im r_j - Im r_i * Re r_j`` for ``i < j``, where ``r_i`` is row
    ``i`` of ``S``.

    Parameters
    ----------
    S : (L, N) complex array
    isometric : bool, default=False
        Scale the off-diagonal rows (``i < j``) of both families by
        ``sqrt(2)`` so that ``||D x|| = ||khatri_rao(S) x||`` for real ``x``.
        The null space is the same either way.
    """
    S = as_sequences(S)
    L = S.shape[0]
    re, im = S.real, S.imag
    iu = np.triu_indices(L)
    iu1 = np.triu_indices(L, 1)
    sym = re[iu[0]] * re[iu[1]] + im[iu[0]] * im[iu[1]]
    anti = re[iu1[0]] * im[iu1[1]] - im[iu1[0]] * re[iu1[1]]
    if isometric:
        sym[iu[0] != iu[1]] *= np.sqrt(2.0)
        anti *= np.sqrt(2.0)
    return np.vstack([sym, anti])


def lifted_matrices(S, isometric=False):
    return LiftedMatrices(khatri_rao(S), build_D(S, isometric=isometric))


def numerical_rank(matrix, rank_tol=DEFAULT_RANK_TOL):
    """Number of singular values above ``rank_tol * sigma_max``."""
    matrix = np.asarray(matrix)
    if matrix.size == 0:
        return 0
    sv = linalg.svd(matrix, compute_uv=False, check_finite=False)
    if sv[0] == 0:
        return 0
    return int(np.sum(sv > rank_tol * sv[0]))


def null_space(matrix, rank_tol=DEFAULT_RANK_TOL):
    """Orthonormal basis (as columns) of the numerical null space.

    Singular values below ``rank_tol * sigma_max`` count as zero. A zero
    matrix has the whole space as null space.
    """
    matrix = np.asarray(matrix)
    if matrix.ndim != 2:
        raise ValueError(f"matrix must be 2-D, got shape {matrix.shape}")
    if not 0 < rank_tol < 1:
        raise ValueError(f"rank_tol must lie in (0, 1), got {rank_tol}")
    n = matrix.shape[1]
    if matrix.shape[0] == 0:
        return np.eye(n)
    _, sv, vh = linalg.svd(matrix, full_matrices=True, check_finite=False)
    rank = int(np.sum(sv > rank_tol * sv[0])) if sv.size and sv[0] > 0 else 0
    return vh[rank:].conj().T


def block_split(J, inactive_set):
    """Split ``J`` into the ``(I, I)``, ``(I, I^c)`` and ``(I^c, I^c)`` blocks."""
    J = np.asarray(J)
    n = J.shape[0]
    if J.ndim != 2 or J.shape[1] != n:
        raise ValueError(f"J must be square, got shape {J.shape}")
    I = check_index_set(inactive_set, n, "inactive_set")
    Ic = complement(I, n)
    return BlockSplit(J[np.ix_(I, I)], J[np.ix_(I, Ic)], J[np.ix_(Ic, Ic)], I, Ic)
