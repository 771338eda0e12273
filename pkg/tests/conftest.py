# /tests/conftest.py
# Shared fixtures of the bitflip test suite.

import logging

import pytest

from bitflip import BitDistribution, config
from bitflip.utilities import replica_rng


@pytest.fixture(autouse=True)
def clean_config():
    """Every test starts from the default configuration."""
    config.reset()
    yield
    config.reset()


@pytest.fixture
def rng():
    return replica_rng(20240601, 0)


@pytest.fixture
def geometric_half():
    return BitDistribution.geometric(0.5)


@pytest.fixture
def geometric_low():
    return BitDistribution.geometric(0.3)


@pytest.fixture
def stretched():
    return BitDistribution.stretched_exp(1.0, 0.3)


@pytest.fixture
def single_bit():
    return BitDistribution.table([1.0])



@pytest.fixture(autouse=True)
def clean_logging():
    """Undo the handlers installed by the console entry point."""
    logger = logging.getLogger("bitflip")
    yield
    logger.handlers[:] = []
    logger.setLevel(logging.NOTSET)
