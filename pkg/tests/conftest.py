from __future__ import annotations

import os

import pytest
from hypothesis import HealthCheck, settings

import acceptance_log
from cases import FIRST, SECOND
from cknstab.params import derive_first_order, derive_second_order

settings.register_profile("default", deadline=None, max_examples=25,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("thorough", deadline=None, max_examples=200,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


def pytest_terminal_summary(terminalreporter):
    if not acceptance_log.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in acceptance_log.summary_lines():
        terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def p_case1():
    return derive_first_order(*FIRST["case1"])


@pytest.fixture(scope="session")
def p_case2():
    return derive_first_order(*FIRST["case2"])


@pytest.fixture(scope="session")
def p_pgt2():
    return derive_first_order(*FIRST["pgt2"])


@pytest.fixture(scope="session")
def p_second():
    return derive_second_order(*SECOND)


@pytest.fixture(scope="session", params=sorted(FIRST))
def p_first(request):
    return derive_first_order(*FIRST[request.param])
