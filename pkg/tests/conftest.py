"""Pytest configuration: make the nettmle package importable and share simulated data."""

import os
import sys

import pytest

# Add src/ to sys.path so `import nettmle` works without installing.
_src_dir = os.path.join(
    os.path.dirname(os.path.dirname(os.path.abspath(__file__))),
    "src",
)
if _src_dir not in sys.path:
    sys.path.insert(0, _src_dir)

from nettmle.config import PolicySpec, SimConfig  # noqa: E402
from nettmle.graph import generate_uniform  # noqa: E402
from nettmle.simulator import run_sir  # noqa: E402


@pytest.fixture(scope="module")
def base_network():
    """Uniform-degree contact network on 200 nodes."""
    return generate_uniform(200, 1, 6, seed=3)


@pytest.fixture(scope="module")
def observed(base_network):
    """Observational panel and realized snapshots on the base network."""
    config = SimConfig(init_infected_fraction=0.05, transmission_prob=0.3)
    panel, realized = run_sir(base_network, PolicySpec.observational(), config, seed=11)
    return panel, realized, config


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run slow estimator comparisons")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)
