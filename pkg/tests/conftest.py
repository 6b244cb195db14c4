import pytest

from fermilat.sampling import rng_for


@pytest.fixture
def rng():
    return rng_for(1234)
