import numpy as np
import pytest

from steerkit import families


@pytest.fixture
def rng():
    return families.make_rng(12345)


ACCEPTANCE_RESULTS: dict = {}


def record(criterion: int, passed: bool, detail: str) -> None:
    """Store one acceptance line; printed in the terminal summary."""
    ACCEPTANCE_RESULTS[criterion] = (passed, detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_RESULTS):
        passed, detail = ACCEPTANCE_RESULTS[k]
        terminalreporter.write_line(f"CRITERION {k:2d}: {'PASS' if passed else 'FAIL'} - {detail}")
