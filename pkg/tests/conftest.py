"""
pytest configuration for groupreid tests.
"""

import numpy as np
import pytest

from groupreid.config import RunConfig
from groupreid.data import generate_dataset


def pytest_addoption(parser):
    parser.addoption(
        '--runslow',
        action='store_true',
        default=False,
        help='run the long training experiments marked slow',
    )


def pytest_collection_modifyitems(config, items):
    if config.getoption('--runslow'):
        return
    skip_slow = pytest.mark.skip(reason='needs --runslow')
    for item in items:
        if 'slow' in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture(scope='session')
def smoke_config():
    """The tiny preset every fast end-to-end test trains with."""
    return RunConfig.smoke()


@pytest.fixture(scope='session')
def smoke_data(smoke_config):
    return generate_dataset(smoke_config.data)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
