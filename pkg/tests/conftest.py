import numpy as np
import pytest

import lagland  # noqa: F401  enables 64-bit jax
from lagland.core.models import get_model


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def nodal():
    return get_model("nodal")


@pytest.fixture(scope="session")
def ff_model():
    return get_model("ff_nonproper")


@pytest.fixture(scope="session")
def toric():
    return get_model("toric_reference")


@pytest.fixture(scope="session")
def harvey_lawson():
    return get_model("harvey_lawson")
