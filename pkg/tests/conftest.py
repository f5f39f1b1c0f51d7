import pytest

from rmsim.config import SystemConfig
from rmsim.workload import generate_library


@pytest.fixture(scope="session")
def library():
    """Default traced application library shared across the suite."""
    return generate_library(seed=7, apps_per_category=2, trace_length=12_000)


@pytest.fixture(scope="session")
def library_untraced():
    """Library without counter profiling; predictions fall back to true MLP."""
    return generate_library(seed=7, apps_per_category=2, trace_length=0)


@pytest.fixture()
def system2():
    return SystemConfig(num_cores=2, intervals_per_app=40)
