# conftest.py

import os
import sys

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), "..", "src")))

import pytest

from design import build_verified_design, identity_design
from model import PopulationModel


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long statistical checks (10^5 trials or draws)")


@pytest.fixture(scope="session")
def design_50_2():
    """A verified 2-disjunct design on 50 elements."""
    return build_verified_design(50, 2, seed=7)


@pytest.fixture(scope="session")
def model_50_1():
    return PopulationModel(50, 1.0)


@pytest.fixture
def identity_3():
    return identity_design(3)
