import numpy as np
import pytest

from covdetect import gen_ground_truth, gen_sequences


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_instance(L, N, K, seed=0, kind="gaussian"):
    S = gen_sequences(kind, L, N, seed=np.random.SeedSequence([seed, 0])).entries
    truth = gen_ground_truth(N, K, seed=np.random.SeedSequence([seed, 1]))
    return S, truth


def random_psd(rng, n, rank=None):
    rank = n if rank is None else rank
    A = rng.standard_normal((n, rank))
    return A @ A.T


def random_cov(rng, L):
    A = rng.standard_normal((L, 2 * L)) + 1j * rng.standard_normal((L, 2 * L))
    return A @ A.conj().T / (2 * L)


# lines collected by the acceptance tests, echoed in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
