import numpy as np
import pytest

from asep_lab.rates import HoppingRates


@pytest.fixture
def rates():
    return HoppingRates(0.3)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
