import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from lgwalk.graph import from_arcs

# fixtures used under @given are immutable graphs, safe to share across examples
settings.register_profile(
    "default", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.function_scoped_fixture]
)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def six_graph():
    """Small connected undirected graph with varied degrees and weights."""
    src = [0, 0, 0, 1, 1, 2, 3, 4]
    dst = [1, 2, 3, 2, 4, 3, 5, 5]
    w = [1.0, 2.0, 1.0, 3.0, 1.0, 1.0, 2.0, 1.0]
    return from_arcs(6, src, dst, w)


def two_triangles():
    return from_arcs(6, [0, 1, 2, 3, 4, 5], [1, 2, 0, 4, 5, 3])
