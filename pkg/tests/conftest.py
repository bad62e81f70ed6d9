import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from gestureid.dataset import SyntheticSpec, generate_synthetic

settings.register_profile(
    "repo",
    deadline=None,
    max_examples=40,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture],
)
settings.load_profile("repo")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def small_corpus():
    """4 performers, 4 gestures, default repetitions: 160 recordings."""
    return generate_synthetic(SyntheticSpec(performer_count=4, gesture_count=4, seed=1, style_separation=1.0))


def blobs(rng, n_classes, per_class, dim, spread=4.0, scale=1.0):
    centers = rng.normal(0.0, spread, size=(n_classes, dim))
    X = np.vstack([centers[c] + scale * rng.normal(size=(per_class, dim)) for c in range(n_classes)])
    y = np.repeat(np.arange(n_classes), per_class)
    return X, y
