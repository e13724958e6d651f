import os

import numpy as np
import pytest

from svrg.models import ReturnRangeSeries, SvrgParams


@pytest.fixture(autouse=True)
def functional_only():
    if os.environ.get("SVRG_FUNCTIONAL") != "1":
        pytest.skip("Monte Carlo checks run with SVRG_FUNCTIONAL=1")


@pytest.fixture
def rng():
    return np.random.default_rng(19870101)


@pytest.fixture
def params():
    return SvrgParams(phi=0.95, omega_en=-0.15, omega_nn=0.15, nu1=18.0, nu2=28.0)


@pytest.fixture
def three_days():
    return ReturnRangeSeries(
        np.arange("2020-01-01", "2020-01-04", dtype="datetime64[D]"),
        [0.4, -1.1, 0.6],
        [1.2, 2.0, 0.9],
    )
