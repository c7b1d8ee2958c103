import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from sktspec.model import preset

settings.register_profile(
    "suite",
    deadline=None,
    max_examples=50,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("suite")


@pytest.fixture(scope="session")
def case1():
    return preset("case1")


@pytest.fixture(scope="session")
def case2():
    return preset("case2")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
