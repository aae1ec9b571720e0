"""Shared fixtures for the test suites."""
import pytest

from annealing.encoding import builtin_instance
from backend.config import settings


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run slow optimization checks")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running optimization checks")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture(scope="session")
def inst21():
    return builtin_instance(21)


@pytest.fixture(scope="session")
def inst2479():
    return builtin_instance(2479)


@pytest.fixture
def results_dir(tmp_path, monkeypatch):
    """Point result and instance storage at a temporary directory."""
    monkeypatch.setattr(settings, "results_dir", str(tmp_path / "results"))
    monkeypatch.setattr(settings, "instances_dir", str(tmp_path / "instances"))
    return tmp_path
