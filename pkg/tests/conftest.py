import numpy as np
import pytest

from vibqst.exciton import solve_exciton
from vibqst.fockspace import m_operator
from vibqst.params import ModelParams, derive


@pytest.fixture(scope="session")
def params():
    return ModelParams()


@pytest.fixture(scope="session")
def derived(params):
    return derive(params)


@pytest.fixture(scope="session")
def exciton(params, derived):
    return solve_exciton(params, derived)


@pytest.fixture(scope="session")
def coupling(exciton, derived):
    return m_operator(exciton, derived)


@pytest.fixture
def rng():
    return np.random.default_rng(7)
