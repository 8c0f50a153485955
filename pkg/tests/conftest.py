from __future__ import annotations

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def pytest_addoption(parser):
    parser.addoption("--extended", action="store_true", default=False,
                     help="run the long-running Swiss and schizophrenic fixtures")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--extended"):
        return
    skip = pytest.mark.skip(reason="long-running fixture; use --extended")
    for item in items:
        if "extended" in item.keywords:
            item.add_marker(skip)
