import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from meanfield_if.fokker_planck import default_grid
from meanfield_if.model import ModelConfig

settings.register_profile("repo", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("repo")


@pytest.fixture(scope="session")
def brownian_cfg():
    """x0 = 0.8, zero drift, alpha = 0.05, T = 1."""
    return ModelConfig.create(alpha=0.05, x0=0.8, T=1.0)


@pytest.fixture(scope="session")
def coarse_grid(brownian_cfg):
    return default_grid(brownian_cfg, dy=0.01)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
