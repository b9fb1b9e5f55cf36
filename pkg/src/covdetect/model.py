"""Synthetic instances of the grant-free random-access uplink.

A base station with ``M`` antennas observes ``Y = S diag(gamma)^(1/2) H + W``
where ``S`` (L x N) holds the devices' pilot sequences, ``gamma`` is the
vector of large-scale fading coefficients (zero for inactive devices) and
``H``, ``W`` are i.i.d. circularly-symmetric complex normal.
"""

from dataclasses import dataclass, field

import numpy as np

from ._rng import complex_normal, make_rng
from ._validation import (
    check_covariance,
    check_gamma,
    check_index_set,
    check_positive,
    check_sequences,
    complement,
)

SEQUENCE_KINDS = ("gaussian", "qpsk_alphabet", "partial_dft", "sphere")

DEFAULT_SNR_DB = 10.0


def default_noise_var(L, gamma_active=1.0, snr_db=DEFAULT_SNR_DB):
    """Noise variance giving ``gamma_active * L / noise_var`` equal to ``snr_db``."""
    return gamma_active * L / 10.0 ** (snr_db / 10.0)


@dataclass
class SystemConfig:
    """Dimensions and power levels of one random-access system.

    ``noise_var`` defaults to the value giving a 10 dB per-sequence SNR.
    """

    N: int
    K: int
    L: int
    M: int
    noise_var: float = None
    gamma_active: float = 1.0

    def __post_init__(self):
        check_positive(self.N, "N", integer=True)
        check_positive(self.K, "K", integer=True, allow_zero=True)
        check_positive(self.L, "L", integer=True)
        check_positive(self.M, "M", integer=True)
        check_positive(self.gamma_active, "gamma_active")
        if self.K > self.N:
            raise ValueError(f"K={self.K} exceeds N={self.N}")
        if self.noise_var is None:
            self.noise_var = default_noise_var(self.L, self.gamma_active)
        check_positive(self.noise_var, "noise_var")


@dataclass
class SequenceMatrix:
    entries: np.ndarray
    kind: str

    def __array__(self, dtype=None, copy=None):
        if dtype is None:
            return self.entries
        return self.entries.astype(dtype)

    @property
    def shape(self):
        return self.entries.shape


@dataclass
class GroundTruth:
    gamma0: np.ndarray
    inactive_set: np.ndarray
    active_set: np.ndarray

    @property
    def N(self):
        return self.gamma0.shape[0]

    @property
    def K(self):
        return self.active_set.shape[0]

    @classmethod
    def from_gamma(cls, gamma0):
        """Build the index sets from an arbitrary nonnegative vector."""
        gamma0 = np.asarray(gamma0, dtype=float)
        gamma0 = check_gamma(gamma0, gamma0.shape[0], "gamma0")
        active = np.flatnonzero(gamma0 > 0)
        return cls(gamma0, complement(active, gamma0.shape[0]), active)


@dataclass
class CovMatrix:
    sigma: np.ndarray
    provenance: str = field(default="sample")

    def __array__(self, dtype=None, copy=None):
        if dtype is None:
            return self.sigma
        return self.sigma.astype(dtype)

    @property
    def shape(self):
        return self.sigma.shape


def _as_array(obj):
    if isinstance(obj, (SequenceMatrix, CovMatrix)):
        return np.asarray(obj)
    return obj


def gen_sequences(kind, L, N, seed, dft_size=None):
    """Draw an L x N pilot matrix.

    Parameters
    ----------
    kind : {'gaussian', 'qpsk_alphabet', 'partial_dft', 'sphere'}
        ``gaussian``: i.i.d. CN(0, 1). ``qpsk_alphabet``: uniform over
        {+-1 +-1j}. ``sphere``: columns uniform on the sphere of radius
        sqrt(L). ``partial_dft``: L random rows and N distinct columns of the
        unnormalized ``dft_size``-point DFT matrix (default ``dft_size = N``).
    L, N : int
    seed : int, SeedSequence or Generator

    Returns
    -------
    SequenceMatrix
    """
    check_positive(L, "L", integer=True)
    check_positive(N, "N", integer=True)
    rng = make_rng(seed)
    if kind == "gaussian":
        S = complex_normal(rng, (L, N))
    elif kind == "qpsk_alphabet":
        re = rng.integers(0, 2, size=(L, N)) * 2 - 1
        im = rng.integers(0, 2, size=(L, N)) * 2 - 1
        S = re + 1j * im
    elif kind == "sphere":
        S = complex_normal(rng, (L, N))
        S *= np.sqrt(L) / np.linalg.norm(S, axis=0)
    elif kind == "partial_dft":
        F = N if dft_size is None else int(dft_size)
        if F < N:
            raise ValueError(f"dft_size={F} is smaller than N={N}")
        if F < L:
            raise ValueError(f"dft_size={F} is smaller than L={L}")
        rows = np.sort(rng.choice(F, size=L, replace=False))
        cols = np.arange(N) if F == N else np.sort(rng.choice(F, size=N, replace=False))
        S = np.exp(-2j * np.pi * np.outer(rows, cols) / F)
    else:
        raise ValueError(f"unknown sequence kind {kind!r}; expected one of {SEQUENCE_KINDS}")
    return SequenceMatrix(np.ascontiguousarray(S, dtype=np.complex128), kind)


def gen_ground_truth(N, K, gamma_active=1.0, seed=None):
    """Uniformly random K-subset of active devices, all with ``gamma_active``."""
    check_positive(N, "N", integer=True)
    check_positive(K, "K", integer=True, allow_zero=True)
    check_positive(gamma_active, "gamma_active")
    if K > N:
        raise ValueError(f"K={K} exceeds N={N}")
    rng = make_rng(seed)
    active = np.sort(rng.choice(N, size=K, replace=False)) if K else np.zeros(0, dtype=np.int64)
    gamma0 = np.zeros(N)
    gamma0[active] = gamma_active
    return GroundTruth(gamma0, complement(active, N), active.astype(np.int64))


def true_covariance(S, gamma, noise_var):
    """``sum_n gamma_n s_n s_n^H + noise_var * I``."""
    S = check_sequences(_as_array(S))
    L, N = S.shape
    gamma = check_gamma(gamma, N)
    check_positive(noise_var, "noise_var")
    sigma = (S * gamma) @ S.conj().T
    sigma = 0.5 * (sigma + sigma.conj().T)
    sigma[np.diag_indices(L)] += noise_var
    return CovMatrix(sigma, "true_limit")


def simulate(S, ground_truth, M, noise_var, seed):
    """Draw the L x M received pilot block ``Y``.

    Channels and noise come from one stream in a fixed order (H first, then
    W), so a given seed always yields the same ``Y``.
    """
    S = check_sequences(_as_array(S))
    L, N = S.shape
    gamma0 = ground_truth.gamma0 if isinstance(ground_truth, GroundTruth) else ground_truth
    gamma0 = check_gamma(gamma0, N, "gamma0")
    check_positive(M, "M", integer=True)
    check_positive(noise_var, "noise_var")
    rng = make_rng(seed)
    active = np.flatnonzero(gamma0)
    H = complex_normal(rng, (active.size, M))
    W = complex_normal(rng, (L, M), noise_var)
    return S[:, active] @ (np.sqrt(gamma0[active])[:, None] * H) + W


def sample_covariance(Y):
    """``Y Y^H / M``, symmetrized."""
    Y = np.asarray(Y)
    if Y.ndim != 2 or Y.size == 0:
        raise ValueError(f"Y must be a non-empty 2-D array, got shape {Y.shape}")
    M = Y.shape[1]
    sigma = (Y @ Y.conj().T) / M
    return CovMatrix(0.5 * (sigma + sigma.conj().T), "sample")


def as_covariance(cov, L):
    """Validate a covariance argument given as array or ``CovMatrix``."""
    return check_covariance(_as_array(cov), L)


def as_sequences(S):
    return check_sequences(_as_array(S))


def as_index_set(indices, n):
    return check_index_set(indices, n)
