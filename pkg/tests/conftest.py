import numpy as np
import pytest

from tdhfc import molsys


def pytest_addoption(parser):
    parser.addoption("--run-slow", action="store_true", default=False,
                     help="run the hours-scale full campaign tests")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--run-slow"):
        return
    skip = pytest.mark.skip(reason="needs --run-slow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)


def random_complex(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def random_hermitian(rng, n):
    A = random_complex(rng, n, n)
    return 0.5 * (A + A.conj().T)


def random_projector(rng, n, rank):
    """Random Hermitian idempotent of given rank (trace == rank)."""
    G = random_complex(rng, n, rank)
    Q, _ = np.linalg.qr(G)
    return Q @ Q.conj().T


@pytest.fixture(scope="session")
def h2():
    return molsys.orthogonalize(molsys.load_system(molsys.bundled_data_path("h2_sto3g.json")))


@pytest.fixture(scope="session")
def hehp():
    return molsys.orthogonalize(molsys.load_system(molsys.bundled_data_path("hehp_sto3g.json")))


@pytest.fixture(scope="session")
def lih():
    return molsys.orthogonalize(molsys.load_system(molsys.bundled_data_path("lih_sto3g.json")))
