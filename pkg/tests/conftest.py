import numpy as np
import pytest

from finslerkit import CORPUS, load_field


@pytest.fixture(scope="session")
def corpus():
    """The six 2D registry members keyed by name."""
    return {name: load_field(name) for name in CORPUS}


@pytest.fixture(scope="session")
def euclidean2():
    return load_field("euclidean2")


@pytest.fixture(scope="session")
def conformal():
    return load_field("conformal_exp")


@pytest.fixture(scope="session")
def stereo():
    return load_field("sphere_stereo")


@pytest.fixture(scope="session")
def quartic():
    return load_field("quartic2")


@pytest.fixture(scope="session")
def randers_flat():
    return load_field("randers_flat")


@pytest.fixture(scope="session")
def randers_curved():
    return load_field("randers_curved")


@pytest.fixture
def rng():
    return np.random.default_rng(12)
