"""Joint activity and data detection with per-device sequence sets.

Each device owns ``Q = 2**b`` sequences and sends one of them, so the
sequence index carries ``b`` bits. Detection runs the MLE on the lifted
``L x NQ`` problem and then keeps the largest entry of each block.
"""

from dataclasses import dataclass

import numpy as np

from ._rng import make_rng
from ._validation import check_positive
from .fisher import DEFAULT_RANK_TOL
from .model import GroundTruth, SystemConfig, as_sequences, gen_ground_truth, gen_sequences
from .phase import phase_sweep
from .solvers import SolverConfig, coordinate_descent_mle


@dataclass
class EmbedConfig:
    """``b`` bits per active device on top of a base system.

    ``b = 0`` is accepted and reduces every pipeline to plain activity
    detection.
    """

    b: int
    system: SystemConfig

    def __post_init__(self):
        check_positive(self.b, "b", integer=True, allow_zero=True)

    @property
    def Q(self):
        return 2 ** self.b

    @property
    def lifted_dim(self):
        return self.system.N * self.Q


@dataclass
class EmbedGroundTruth:
    """Lifted fading vector plus the transmitted sequence index per device.

    ``symbols[n]`` is ``-1`` for inactive devices.
    """

    gamma_tilde: np.ndarray
    symbols: np.ndarray
    Q: int

    @property
    def N(self):
        return self.symbols.size

    @property
    def devices(self):
        """Device-level ground truth (block maxima)."""
        return GroundTruth.from_gamma(self.gamma_tilde.reshape(self.N, self.Q).max(axis=1))

    @property
    def lifted(self):
        """Ground truth on the lifted coordinates."""
        return GroundTruth.from_gamma(self.gamma_tilde)


@dataclass
class JointDecision:
    """Per-device decisions; ``bits[n]`` is ``-1`` for devices declared inactive."""

    active: np.ndarray
    bits: np.ndarray
    gamma_hat: np.ndarray = None

    def lifted_support(self, Q):
        """Lifted vector support induced by the decisions (one entry per active block)."""
        idx = np.flatnonzero(self.active)
        return idx * Q + self.bits[idx]


def lift_sequences(kind, L, N, Q, seed, dft_size=None):
    """L x NQ matrix; block ``n`` (device ``n``) occupies columns ``[nQ, (n+1)Q)``.

    With ``Q = 1`` this is exactly ``gen_sequences(kind, L, N, seed)``.
    """
    check_positive(Q, "Q", integer=True)
    return gen_sequences(kind, L, N * Q, seed, dft_size)


def gen_embed_ground_truth(N, K, Q, gamma_active=1.0, seed=None):
    """Random active devices and uniformly random transmitted sequences.

    The active set is drawn first from the same stream as
    :func:`~covdetect.model.gen_ground_truth`, so it does not depend on ``Q``.
    """
    check_positive(Q, "Q", integer=True)
    rng = make_rng(seed)
    devices = gen_ground_truth(N, K, gamma_active, rng)
    symbols = np.full(N, -1, dtype=np.int64)
    if Q == 1:
        symbols[devices.active_set] = 0
    else:
        symbols[devices.active_set] = rng.integers(0, Q, size=devices.K)
    gamma_tilde = np.zeros(N * Q)
    act = devices.active_set
    gamma_tilde[act * Q + symbols[act]] = devices.gamma0[act]
    return EmbedGroundTruth(gamma_tilde, symbols, Q)


def select_blocks(gamma_hat, Q, l_th):
    """Keep the largest entry per block (lowest index on ties) and threshold it."""
    gamma_hat = np.asarray(gamma_hat, dtype=float)
    if gamma_hat.size % Q:
        raise ValueError(f"length {gamma_hat.size} is not a multiple of Q={Q}")
    blocks = gamma_hat.reshape(-1, Q)
    choice = blocks.argmax(axis=1)
    peak = blocks[np.arange(blocks.shape[0]), choice]
    active = peak >= l_th
    bits = np.where(active, choice, -1)
    return JointDecision(active, bits, gamma_hat)


def detect_joint(S_tilde, cov_sample, noise_var, Q, solver_config=None, l_th=0.5):
    """Estimate the lifted vector by coordinate descent, then decide per block.

    Returns
    -------
    JointDecision
    """
    S_tilde = as_sequences(S_tilde)
    check_positive(Q, "Q", integer=True)
    if S_tilde.shape[1] % Q:
        raise ValueError(f"S_tilde has {S_tilde.shape[1]} columns, not a multiple of Q={Q}")
    est = coordinate_descent_mle(S_tilde, cov_sample, noise_var, solver_config or SolverConfig())
    return select_blocks(est.gamma_hat, Q, l_th)


def joint_error_counts(decision, truth):
    """Classify every device.

    Returns a dict with ``missed`` (active devices not declared, or declared
    with the wrong sequence), ``false_alarm`` (inactive devices declared,
    whatever the sequence), ``wrong_bits`` (the subset of ``missed`` that was
    declared), and the class sizes ``n_active`` / ``n_inactive``.
    """
    active_true = truth.symbols >= 0
    declared = np.asarray(decision.active, dtype=bool)
    right = decision.bits == truth.symbols
    missed = active_true & ~(declared & right)
    return {
        "missed": int(missed.sum()),
        "wrong_bits": int((active_true & declared & ~right).sum()),
        "false_alarm": int((~active_true & declared).sum()),
        "n_active": int(active_true.sum()),
        "n_inactive": int((~active_true).sum()),
    }


def phase_sweep_embed(N, b, L_list, K_list, trials, seed=0, method="covmatch_lp", kind="gaussian",
                      shortcut=True, rank_tol=DEFAULT_RANK_TOL, n_jobs=1):
    """Identifiability sweep on the lifted problem.

    The inactive set is every lifted coordinate except the ``K`` selected
    ones; axes normalize by ``N * 2**b``. With ``b = 0`` the result equals
    :func:`~covdetect.phase.phase_sweep` for the same arguments.
    """
    check_positive(b, "b", integer=True, allow_zero=True)
    return phase_sweep(N, L_list, K_list, trials, method=method, seed=seed, kind=kind, Q=2 ** b,
                       shortcut=shortcut, rank_tol=rank_tol, n_jobs=n_jobs)
