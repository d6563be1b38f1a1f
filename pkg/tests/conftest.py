import numpy as np
import pytest

from vensemble import SeedSpec


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def seed():
    return SeedSpec(2024, "test")
