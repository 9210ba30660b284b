from __future__ import annotations

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from semiboot.models import ModelConfig, generate_data

settings.register_profile("default", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

# filled by tests/test_acceptance.py, echoed in the terminal summary
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])


@pytest.fixture
def rc_data():
    return generate_data(ModelConfig(), 120, 7)


@pytest.fixture
def cs_data():
    return generate_data(ModelConfig(kind="cox-cs"), 120, 7)


@pytest.fixture
def pl_data():
    return generate_data(ModelConfig(kind="partly-linear"), 120, 7)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)
