import numpy as np
import pytest

from netmatch.model import LinkFunction, NetworkSample, TrueParameters, simulate_sample


@pytest.fixture
def path3():
    """Path 0 - 1 - 2."""
    return np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]])


@pytest.fixture(scope="session")
def block_sample():
    return simulate_sample(120, LinkFunction.blockmodel(), TrueParameters([1.0]), 11)


@pytest.fixture(scope="session")
def sample50():
    return simulate_sample(50, LinkFunction.homophily(), TrueParameters([1.0]), 5)


def random_graph(n, p, rng):
    D = np.triu((rng.uniform(size=(n, n)) < p).astype(int), 1)
    return D + D.T
