import os

import numpy as np
import pytest
from hypothesis import settings

# HYPOTHESIS_PROFILE=thorough runs the property tests with many more examples.
settings.register_profile("thorough", max_examples=2000, deadline=None)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

from couette_ks.spectral import GridSpec


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def cube16():
    return GridSpec((16, 16, 16), (2 * np.pi,) * 3)


@pytest.fixture
def cube2pi():
    """32^3 on [0, 2 pi)^3."""
    return GridSpec((32, 32, 32), (2 * np.pi,) * 3)
