"""Shared fixtures for the estimation test suites."""

import os
import sys

import numpy as np
import pytest

# Add the parent directory to sys.path
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from app.models.calibration import BoundingSequence  # noqa: E402


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run full-dimension acceptance checks")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def rng():
    return np.random.default_rng(20240101)


@pytest.fixture
def make_sequence():
    """Build a bounding sequence with a chosen c, bypassing calibration."""

    def _make(c, theta, p, grid="observed", alpha=0.1):
        return BoundingSequence(c=c, theta=theta, alpha=alpha, grid=grid, R=1, p=p, provenance="test")

    return _make
