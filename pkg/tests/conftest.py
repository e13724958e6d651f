import re
import warnings

import numpy as np
import pytest

from svrg.model import simulate_svrg
from svrg.models import SvrgParams

NEVER_AWAITED_RE = re.compile(r"coroutine '([^']+)' was never awaited", re.M)


@pytest.hookimpl(hookwrapper=True)
def pytest_pyfunc_call(pyfuncitem):
    with warnings.catch_warnings(record=True) as records:
        warnings.simplefilter("always")
        yield
        for record in records:
            message = str(record.message)
            assert NEVER_AWAITED_RE.search(message) is None, message


@pytest.fixture
def rng():
    return np.random.default_rng(20210301)


@pytest.fixture
def params():
    return SvrgParams(phi=0.95, omega_en=-0.15, omega_nn=0.15, nu1=18.0, nu2=28.0)


@pytest.fixture
def simulated(params):
    return simulate_svrg(params, 60, np.random.default_rng(7))


@pytest.fixture
def series(simulated):
    return simulated[0]


@pytest.fixture
def state(simulated):
    return simulated[1]
