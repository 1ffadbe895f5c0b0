import numpy as np
import pytest

from hybridcr import (SystemConfig, build_outage_model, uniform_correlation_set)


@pytest.fixture(scope="session")
def cfg():
    return SystemConfig()


@pytest.fixture(scope="session")
def corr(cfg):
    return uniform_correlation_set(0.5, cfg.M)


@pytest.fixture(scope="session")
def model(cfg, corr):
    return build_outage_model(corr, cfg)


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
