import numpy
import pytest

from symred import configure
from symred.solutions import load_catalog

SEED = 7


@pytest.fixture(scope='session', autouse=True)
def config():
    cfg = {'seed': SEED, 'timestamp': False}
    with configure(cfg) as run_ctx:
        yield run_ctx


@pytest.fixture
def rng():
    return numpy.random.default_rng(SEED)


@pytest.fixture(scope='session')
def catalog():
    return load_catalog()
