# tests/conftest.py

import numpy as np
import pytest

from daf_numerics import config
from daf_numerics.analytics.leaf_numerics import ConstantLineField
from daf_numerics.manifolds.system_zoo import build_system, perturb


@pytest.fixture(autouse=True)
def quiet_console(monkeypatch):
    monkeypatch.setattr(config, "VERBOSE", False)
    monkeypatch.setattr(config, "PROGRESS_BARS", False)


@pytest.fixture
def skew():
    return build_system("skew")


@pytest.fixture
def suspension():
    return build_system("suspension")


@pytest.fixture(scope="session")
def hhu():
    return build_system("hhu")


@pytest.fixture
def skew_partner(skew):
    return perturb(skew, kind="fiber-shear", epsilon=1e-4)


@pytest.fixture
def vertical():
    """E^c of the skew product and the suspension is the theta axis."""

    def make(system):
        return ConstantLineField((0.0, 0.0, 1.0), system.manifold)

    return make


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
