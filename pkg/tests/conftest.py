import numpy as np
import pytest

from reverbsep.mixsim import generate_dataset


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def short_scenes():
    """Four quarter-second scenes, cheap enough for unit tests."""
    return generate_dataset(77, 4, duration_s=0.25)
