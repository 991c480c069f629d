import logging

import numpy as np
import pytest

from lfhc.fixtures import SyntheticSceneSpec, generate


@pytest.fixture(autouse=True)
def _quiet_fdl_warnings():
    # subsets smaller than the layer count are routine in the pipeline tests
    logging.getLogger("lfhc.fdl").setLevel(logging.ERROR)
    yield


@pytest.fixture(scope="session")
def small_two_plane():
    return generate(SyntheticSceneSpec("two-plane", {"d1": 0, "d2": 1}, texture="fractal"), 5, 5, 16, 16)


@pytest.fixture(scope="session")
def plane_lf():
    return generate(SyntheticSceneSpec("textured-plane", {"d": 0.5}), 5, 5, 32, 32)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
