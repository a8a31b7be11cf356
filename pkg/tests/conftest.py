# conftest.py

import os
import sys

import mpmath as mp
import pytest

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from pfm import RunConfig, from_hypergeometric4, from_hypergeometric5


@pytest.fixture(autouse=True)
def working_precision():
    with mp.workdps(50):
        yield


@pytest.fixture
def quintic():
    return from_hypergeometric4("1/5", "2/5", 3125)


@pytest.fixture
def order5():
    return from_hypergeometric5("1/2", "1/2", 1024)


@pytest.fixture
def fast_config():
    '''Loose settings that keep a full continuation run within seconds.'''
    return RunConfig(precision=30, terms=20, tol=1e-14, max_precision=80)
