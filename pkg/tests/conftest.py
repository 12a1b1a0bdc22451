from __future__ import annotations

import pytest

from gkpforge.barriers import load_anchors
from gkpforge.gkp import load_coefficients
from gkpforge.montecarlo import load_sampling_spec
from gkpforge.nucdata import load_bundled_chain


@pytest.fixture(scope="session")
def mo_chain():
    return load_bundled_chain("mo-chain-v1")


@pytest.fixture(scope="session")
def frib_chain():
    return load_bundled_chain("mo-chain-frib-synthetic-v1")


@pytest.fixture(scope="session")
def anchors():
    return load_anchors("mo41-anchors-v1")


@pytest.fixture(scope="session")
def coeffs():
    return load_coefficients("mo41-coeffs-v1")


@pytest.fixture(scope="session")
def sampling_spec():
    return load_sampling_spec("mo91-sampling-v1")
