import os
import sys

import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

settings.register_profile(
    "default", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
SCENARIOS = os.path.join(ROOT, "scenarios")

# acceptance criteria append (number, passed, detail) here; printed at the end
CRITERIA: list = []


@pytest.fixture(scope="session")
def scenario_path():
    return lambda name: os.path.join(SCENARIOS, f"{name}.cfg")


@pytest.fixture(scope="session")
def free_gaussian_runs():
    """Base and refined free-Gaussian histories of the canonical scenario."""
    from wavefield.scenario import load_scenario, simulate

    s = load_scenario(os.path.join(SCENARIOS, "free_gaussian.cfg"))
    return s, simulate(s), simulate(s.refined())


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number, passed, detail in sorted(CRITERIA, key=lambda c: c[0]):
        terminalreporter.write_line(f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}")
