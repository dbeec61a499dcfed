import os
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", max_examples=200, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

DATA_DIR = Path(__file__).parent / "data"
TOY_CSV = Path(__file__).parents[1] / "data" / "toy.csv"


@pytest.fixture
def toy_csv():
    return TOY_CSV


@pytest.fixture
def blobs():
    """Two well separated 2-D blobs, 10 rows each."""
    rng = np.random.default_rng(3)
    X = np.vstack([rng.normal(-5, 0.5, (10, 2)), rng.normal(5, 0.5, (10, 2))])
    y = np.repeat([0, 1], 10)
    return X, y


@pytest.fixture
def three_class():
    rng = np.random.default_rng(11)
    X = rng.uniform(0, 10, size=(150, 4))
    y = np.where((X[:, 0] > 5) & (X[:, 1] <= 4), 2, np.where(X[:, 2] > 6, 1, 0))
    return X, y
