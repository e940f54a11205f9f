import numpy as np
import pytest

import config
from models.sampling import Seed


@pytest.fixture
def seed():
    return Seed(value=7)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def single_thread(monkeypatch):
    monkeypatch.setenv("HDG_THREADS", "1")


@pytest.fixture
def small_chunks(monkeypatch):
    monkeypatch.setattr(config, "CHUNK_BUDGET", 5_000)


@pytest.fixture
def diamond():
    """Two-input ReLU net: class 1 inside |x1| + |x2| < 1."""
    from models.adversarial import MlpModel
    return MlpModel(
        W1=np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]]),
        b1=np.zeros(4),
        W2=np.array([[0.0, 0.0, 0.0, 0.0], [-1.0, -1.0, -1.0, -1.0]]),
        b2=np.array([0.0, 1.0]),
    )
