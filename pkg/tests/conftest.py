import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from bifurclab import families

settings.register_profile("default", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def load():
    cache = {}

    def get(name):
        if name not in cache:
            cache[name] = families.load(name)
        return cache[name]
    return get


def random_sl(rng, d, scale=1.0):
    """Random complex matrix rescaled to determinant 1."""
    m = np.eye(d) + scale * (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d)))
    return m / np.linalg.det(m) ** (1.0 / d)
