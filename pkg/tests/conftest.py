import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from stochot.costs import build_cost_matrix, squared_euclidean
from stochot.measures import DiscreteMeasure, make_rng

settings.register_profile(
    "default", deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


def random_instance(rng, I, J, dim=2, uniform=False):
    """Random point clouds with random (or uniform) weights and a squared cost matrix."""
    X = rng.random((I, dim))
    Y = rng.random((J, dim))
    if uniform:
        mu, nu = DiscreteMeasure.uniform(X), DiscreteMeasure.uniform(Y)
    else:
        a = rng.random(I) + 0.1
        b = rng.random(J) + 0.1
        mu, nu = DiscreteMeasure(X, a / a.sum()), DiscreteMeasure(Y, b / b.sum())
    return mu, nu, build_cost_matrix(squared_euclidean(), X, Y)


@pytest.fixture
def rng():
    return make_rng(1234)
