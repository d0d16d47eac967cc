import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("qpq", deadline=None, max_examples=60)
settings.load_profile("qpq")


@pytest.fixture
def rng():
    return np.random.default_rng(7)
