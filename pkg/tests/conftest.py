import os

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow]
)
settings.register_profile("thorough", deadline=None, max_examples=500)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

_measured = []


@pytest.fixture
def measured():
    """Record ``(criterion, value, tolerance, passed)`` for the end-of-run acceptance table.

    ``passed=None`` marks a diagnostic that is reported but not gated.
    """

    def record(criterion, value, tolerance, passed):
        _measured.append((criterion, value, tolerance, passed))
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not _measured:
        return
    tr = terminalreporter
    tr.section("acceptance measurements")
    for criterion, value, tolerance, passed in _measured:
        tag = "INFO" if passed is None else "PASS" if passed else "FAIL"
        tr.write_line(f"{tag}  {criterion}: {value}  ({tolerance})")
