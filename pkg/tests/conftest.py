import numpy as np
import pytest

from rfqkd.qmath import TwoQubitState


def random_density_matrix(rng, rank=4):
    g = rng.normal(size=(4, rank)) + 1j * rng.normal(size=(4, rank))
    rho = g @ g.conj().T
    return TwoQubitState(rho / np.trace(rho).real)


def random_unitary(rng, n=4):
    z = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


MC_SEED = 20240611


@pytest.fixture(scope="session")
def mc_million():
    """The reference distribution run shared by the statistics and acceptance tests."""
    from rfqkd.montecarlo import McConfig, run_distribution
    return run_distribution(McConfig(10**6, (1.0, 0.98, 0.95), MC_SEED))
