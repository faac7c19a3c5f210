import numpy as np
import pytest
from hypothesis import strategies as st

from spinstep.core import SpinConfiguration


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


@pytest.fixture
def fig2_state():
    return SpinConfiguration.from_vectors([0.0, 0.7248, -0.6889])


def unit_vectors(n):
    """Hypothesis strategy for (n, 3) arrays of unit vectors."""
    comp = st.floats(-1.0, 1.0, allow_nan=False)
    vec = st.tuples(comp, comp, comp).filter(lambda v: sum(x * x for x in v) > 1e-2)
    return st.lists(vec, min_size=n, max_size=n).map(
        lambda vs: np.array(vs) / np.linalg.norm(np.array(vs), axis=1)[:, None]
    )


def rotation_about(axis, angle):
    """Rodrigues rotation matrix; used as an independent closed-form oracle."""
    k = np.asarray(axis, dtype=float)
    k = k / np.linalg.norm(k)
    K = np.array([[0, -k[2], k[1]], [k[2], 0, -k[0]], [-k[1], k[0], 0]])
    return np.eye(3) + np.sin(angle) * K + (1 - np.cos(angle)) * K @ K
