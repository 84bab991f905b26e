import os

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture(scope="session")
def k39():
    from dipolar_mqc.atoms import potassium39

    return potassium39()


@pytest.fixture(scope="session")
def two_level():
    from dipolar_mqc.atoms import test_species

    return test_species()


@pytest.fixture(scope="session")
def cone_x():
    from dipolar_mqc.liouvillians import detection_tensor

    return detection_tensor((1.0, 0.0, 0.0), 0.38).K


# acceptance criteria append (number, passed, detail) here
ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n, ok, detail in sorted(ACCEPTANCE):
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} criterion {n:2d}: {detail}")
